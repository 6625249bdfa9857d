"""Braking across a wet, dry, snow sequence with estimated set-points.

Compares three set-point sources for the sliding-mode regulator: the true
optimum, the RLS curve fit, and a fixed guess. Pass a trained model file
(from `optislip train`) as the first argument to add the network.

Run: python3 demos/03_surface_transition.py [model.json]   (a few seconds without a model)
"""

# %% setup
import sys
from pathlib import Path

from optislip.control import SlidingModeController
from optislip.experiments import SuiteSettings, parse_scenario, swept_torques
from optislip.mlp import load_model
from optislip.svgplot import line_chart
from optislip.vehicle import run_maneuver

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)
settings = SuiteSettings()
scenario = parse_scenario("W-D-S")
tb = 2 * swept_torques(["W"], settings)["W"]
print(f"{scenario.name}: switches at {', '.join(f'{v:.1f}' for v in scenario.thresholds)} m/s, Tb {tb:.0f} N m")


# %% a fixed set-point is just an estimator that never changes its mind
class Fixed:
    name, window, hold = "fixed 0.10", 1, 0.10

    def reset(self):
        pass

    def update(self, pair):
        return self.hold


estimators = {"true optimum": None, "RLS": settings.rls(), "fixed 0.10": Fixed()}
if len(sys.argv) > 1:
    estimators["MLP"] = settings.mlp(load_model(sys.argv[1]))

# %% run each one on the same measurement noise
logs = {}
for name, est in estimators.items():
    log = run_maneuver(settings.config(scenario, tb), controller=SlidingModeController(settings.smc), estimator=est)
    logs[name] = log
    print(f"{name:<13} {log.stop_distance:7.1f} m  {log.stop_time:5.2f} s")

# %% set-points against the truth
truth = logs["true optimum"]
series = {"true optimum": (truth.t, truth.lambda_gt)}
for name, log in logs.items():
    if name != "true optimum":
        series[name] = (log.t, log.lambda_est)
line_chart(series, OUT / "transition_setpoints.svg", title=f"{scenario.name} set-points",
           xlabel="time [s]", ylabel="optimal slip")
print(f"plot in {OUT}")
