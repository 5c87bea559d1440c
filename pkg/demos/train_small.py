"""Train the multi-agent learner on a desk-scale scenario.

Eighty episodes of two platoons on two subchannels, then a greedy
evaluation against the untrained policy. Takes around half a minute.
"""
import numpy as np

from platoonsc.channel import ScenarioConfig
from platoonsc.marl import LearnerConfig, evaluate_policy, train

scenario = ScenarioConfig(n_platoons=2, platoon_size=2, n_subchannels=2)
cfg = LearnerConfig(algorithm="samramarl", actor_hidden=(64, 64),
                    critic_hidden=(64, 64), episodes=80,
                    slots_per_episode=100, local_critic_delayed=False)

learner, metrics, env = train("samramarl", scenario, learner_cfg=cfg, seed=0)
blocks = metrics.global_reward.reshape(8, 10).mean(axis=1)
print("training reward, 10-episode means:")
for i, b in enumerate(blocks):
    bar = "#" * int(b * 60)
    print(f"  episodes {i*10:3d}-{i*10+9:3d}: {b:.3f} {bar}")

eval_seeds = list(range(5000, 5020))
trained = evaluate_policy(env, learner, 20, seeds=eval_seeds)
fresh, _, env0 = train("samramarl", scenario,
                       learner_cfg=LearnerConfig(
                           algorithm="samramarl", actor_hidden=(64, 64),
                           critic_hidden=(64, 64), episodes=0), seed=0)
untrained = evaluate_policy(env0, fresh, 20, seeds=eval_seeds)

print(f"\ngreedy evaluation over {len(eval_seeds)} shared episodes:")
print(f"  trained:   reward {np.mean(trained.global_reward):.3f}, "
      f"QoE {np.mean(trained.mean_qoe):.3f}, "
      f"SRS {np.mean(trained.srs_rate):.2f}, "
      f"delay {np.mean(trained.mean_delay_ms):.1f} ms")
print(f"  untrained: reward {np.mean(untrained.global_reward):.3f}, "
      f"QoE {np.mean(untrained.mean_qoe):.3f}, "
      f"SRS {np.mean(untrained.srs_rate):.2f}, "
      f"delay {np.mean(untrained.mean_delay_ms):.1f} ms")
