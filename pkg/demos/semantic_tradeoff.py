"""The symbol-length trade-off at the heart of the allocation problem.

Longer semantic symbol sequences raise similarity but lower the semantic
rate; the QoE score mixes both against per-vehicle targets. This prints
the whole curve for a fixed SINR so the sweet spot is visible.
"""
from platoonsc import semantics as sem

surrogate = sem.AnalyticSurrogate()
profile = sem.QoEProfile(rate_weight=0.5, rate_target_ksuts=60.0,
                         rate_slope=0.1, sim_target=0.85, sim_slope=55.0)

W, H = 180e3, 4.0
sinr_db = 15.0
sinr = 10 ** (sinr_db / 10)

print(f"bandwidth {W/1e3:.0f} kHz, entropy {H} suts/word, SINR {sinr_db} dB")
print(f"{'u':>3} {'rate ksuts/s':>13} {'similarity':>11} {'Score_R':>8} "
      f"{'Score_A':>8} {'member QoE':>11}")
for u in (1, 2, 5, 8, 10, 12, 16, 20, 30):
    rate = sem.semantic_rate(W, H, u) / 1000.0
    xi = float(sem.similarity_single(surrogate, u, sinr))
    sr = sem.score_sigmoid(rate, profile.rate_target_ksuts, profile.rate_slope)
    sa = sem.score_sigmoid(xi, profile.sim_target, profile.sim_slope)
    print(f"{u:3d} {rate:13.1f} {xi:11.4f} {sr:8.4f} {sa:8.4f} "
          f"{profile.score(rate, xi):11.4f}")

print("\ndelivery-success terms for a 4000-sut payload in a 100 ms window:")
for rate in (20e3, 39e3, 40e3, 41e3, 80e3):
    soft = sem.srs_logistic(rate, 4000.0, 0.1, 1e-3)
    hard = sem.srs_hard(rate * 0.1, 4000.0)
    print(f"  window rate {rate/1e3:5.0f} ksuts/s -> logistic {soft:.3f}, "
          f"hard {hard:.0f}")

print("\nbit-pipe equivalent (no semantic encoding), 40 bits/word:")
print(f"  rate = {sem.traditional_rate(W, H, 40)/1e3:.1f} ksuts/s")
