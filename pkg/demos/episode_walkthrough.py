"""One environment episode, slot by slot.

Two platoon leaders pick subchannels, link modes, powers and symbol
lengths each millisecond; the table shows how payload drains and rewards
accumulate. Agent 0 plays a sensible fixed action, agent 1 a poor one.
"""
import numpy as np

from platoonsc.channel import ScenarioConfig
from platoonsc.env import AgentAction, PlatoonEnv

env = PlatoonEnv(ScenarioConfig(n_platoons=2, platoon_size=2,
                                n_subchannels=2), seed=7)
env.reset(42)

good = AgentAction(subchannel=0, v2v=True, power_text_w=0.9,
                   power_image_w=0.0, u_text=np.array([10]),
                   u_image=np.array([10]))
bad = AgentAction(subchannel=0, v2v=True, power_text_w=0.05,
                  power_image_w=0.0, u_text=np.array([30]),
                  u_image=np.array([30]))  # same channel: interference

print(f"payload per platoon: {env.payload_suts:.0f} suts, "
      f"window {env.slots_per_episode} slots")
print(f"{'slot':>4} {'residual_0':>10} {'residual_1':>10} {'qoe_0':>7} "
      f"{'qoe_1':>7} {'r_global':>9}")
done = False
slot = 0
while not done:
    obs, rewards, done, info = env.step([good, bad])
    slot += 1
    if slot % 10 == 0 or done:
        print(f"{slot:4d} {info['residual_suts'][0]:10.0f} "
              f"{info['residual_suts'][1]:10.0f} {info['qoe'][0]:7.3f} "
              f"{info['qoe'][1]:7.3f} {rewards.global_reward:9.3f}")

print(f"\nhard delivery success: {info['hard_srs']}")
print(f"delay (ms, capped at window): {info['delay_ms']}")
print(f"subchannel collisions this episode were expected: both agents "
      f"sat on channel 0")
