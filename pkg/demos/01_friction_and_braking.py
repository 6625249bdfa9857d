"""Friction curves, their optima, and what braking at the optimum buys.

Run: python3 demos/01_friction_and_braking.py   (a few seconds)
"""

# %% setup
from pathlib import Path

import numpy as np

from optislip.control import SlidingModeController
from optislip.experiments import find_brake_torque, ideal_distance
from optislip.friction import SURFACE_NAMES, mu, optimal_slip, reference_surface
from optislip.svgplot import line_chart
from optislip.vehicle import ManeuverConfig, SurfaceSchedule, VehicleParams, run_maneuver

OUT = Path(__file__).with_name("out")
OUT.mkdir(exist_ok=True)
vp = VehicleParams()

# %% the three reference roads and where each one peaks
grid = np.linspace(0.0, 1.0, 500)
curves = {}
for tag, name in SURFACE_NAMES.items():
    surface = reference_surface(tag)
    peak = optimal_slip(surface)
    curves[name] = (grid, mu(surface, grid))
    print(f"{name:<12} lambda* = {peak.lambda_star:.4f}   mu* = {peak.mu_star:.4f}"
          f"   ideal stop from 80 m/s = {ideal_distance(surface):7.1f} m")
line_chart(curves, OUT / "friction_curves.svg", title="Friction vs slip", xlabel="slip", ylabel="mu")

# %% open loop: the best constant pilot torque sits right below the lock cliff
dry = reference_surface("D")
sweep = find_brake_torque(dry, vp)
ok = ~np.isnan(sweep.distances)
print(f"\nswept {sweep.torques.size} torques on dry asphalt; {np.count_nonzero(~ok)} lock the wheel")
print(f"best open-loop torque {sweep.best_torque:.0f} N m -> {sweep.best_distance:.1f} m")

# %% closed loop: the sliding-mode regulator holds the true optimal slip
cfg = ManeuverConfig(vp, SurfaceSchedule.constant(dry), 2 * sweep.best_torque)
smc = run_maneuver(cfg, controller=SlidingModeController())
locked = run_maneuver(ManeuverConfig(vp, SurfaceSchedule.constant(dry), 2 * sweep.best_torque))
print(f"SMC at the true optimum: {smc.stop_distance:.1f} m in {smc.stop_time:.2f} s")
print(f"same torque without control: {locked.stop_distance:.1f} m (wheel locks, slip {locked.lam[-1]:.2f})")

line_chart(
    {"SMC": (smc.t, smc.lam), "no control": (locked.t, locked.lam)},
    OUT / "dry_slip.svg", title="Dry asphalt, 2x swept torque", xlabel="time [s]", ylabel="slip",
)
print(f"\nplots in {OUT}")
