"""A tiny harness sweep over the semantic demand size.

Writes the standard sweep CSV (raw rows plus mean/std aggregates per
point) into a temporary directory and prints the aggregate rows. Heavier
sweeps run the same way through the CLI:

    platoonsc sweep --param semantic_demand_size --values 1000,2000,4000 \
        --seeds 0,1 --episodes 10
"""
import tempfile

from platoonsc.channel import ScenarioConfig
from platoonsc.harness import RunConfig, RunSettings, sweep
from platoonsc.marl import LearnerConfig

with tempfile.TemporaryDirectory() as tmp:
    cfg = RunConfig(
        scenario=ScenarioConfig(n_platoons=2, platoon_size=2, n_subchannels=2),
        learner=LearnerConfig(algorithm="samramarl", actor_hidden=(16, 16),
                              critic_hidden=(16, 16), episodes=6,
                              slots_per_episode=50, buffer_threshold=32,
                              batch_size=16),
        run=RunSettings(output_dir=tmp),
    )
    path = sweep(cfg, "semantic_demand_size", [1000, 4000], seeds=(0, 1))
    print(f"sweep file: {path.name}\n")
    for line in path.read_text().splitlines():
        cells = line.split(",")
        if line.startswith("#") or cells[3] in ("seed", "mean", "std"):
            print("  " + line)
