"""Exhaustive ground truth on a frozen slot.

Freezes one channel realization into a static instance, enumerates every
grid assignment, and shows how far random assignments fall short of the
optimum. The same instance round-trips through its JSON file format.
"""
import tempfile
from pathlib import Path

import numpy as np

from platoonsc import oracle
from platoonsc.channel import ScenarioConfig
from platoonsc.env import PlatoonEnv

env = PlatoonEnv(ScenarioConfig(n_platoons=2, platoon_size=2,
                                n_subchannels=2), seed=3)
env.reset(11)
inst = oracle.instance_from_env(env)
print(f"agents: {inst.n_agents}, subchannels: {inst.n_subchannels}, "
      f"power grid: {inst.power_levels}, u grid: {inst.u_levels}")
print(f"joint assignments to enumerate: {oracle.joint_space_size(inst)}")

assignment, best = oracle.enumerate_optimum(inst)
print(f"\noptimum objective: {best.total:.4f}")
for i, a in enumerate(assignment):
    mode = "broadcast" if a.v2v else "uplink"
    print(f"  agent {i}: subchannel {a.subchannel}, {mode}, "
          f"p_text {a.power_text_w:.2f} W, p_image {a.power_image_w:.2f} W, "
          f"u {a.u_text.tolist()}")

rng = np.random.default_rng(0)
values = [oracle.evaluate_objective(inst,
                                    oracle.random_feasible_assignment(inst, rng)
                                    ).total
          for _ in range(500)]
print(f"\n500 random feasible assignments: best {max(values):.4f}, "
      f"mean {np.mean(values):.4f} (optimum {best.total:.4f})")

# the environment's own single-slot evaluation agrees with the oracle path
env_value = env.single_slot_objective(assignment)
print(f"environment evaluation of the optimum: {env_value:.12f} "
      f"(difference {abs(env_value - best.total):.2e})")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "instance.json"
    oracle.save_instance(inst, path)
    reloaded = oracle.load_instance(path)
    again = oracle.evaluate_objective(reloaded, assignment).total
    print(f"instance JSON round-trip objective: {again:.12f}")
