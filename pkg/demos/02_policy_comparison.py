"""Long-run utility of the learned scheduler against three reference policies.

A shortened version of the arrival-rate sweep: 3 seeds and 3000 iterations
per run, about a minute on one core.
"""

from fedsched.harness import ExperimentSpec, run_sweep, summarize
from fedsched.model import default_config

spec = ExperimentSpec(base=default_config(), variable="arrival_rate", values=[1, 3, 5],
                      seeds=[0, 1, 2], horizon=3000, burn_in=1000)
records = run_sweep(spec)

print("policy     lambda  utility  (sd)    worst outage")
for policy, _, value, _, mean, sd, outage in summarize(records):
    print(f"{policy:9s}  {value:6}  {mean:7.3f}  ({sd:.3f})  {outage:.3f}")
