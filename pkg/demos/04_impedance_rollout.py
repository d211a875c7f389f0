"""Closed-loop handover rollouts under Cartesian impedance control.

Runs the simulated handover on easy and adversarial receiver scenarios
with the learned parameter set, then shows how the forecast horizon
cancels tracking lag on a constant-velocity receiver.
"""
import handover as h

if __name__ == "__main__":
    dataset = h.generate_synthetic(h.GeneratorConfig(n_id=60, n_ood=8), seed=11)
    ctx = h.fit_context(dataset, inducing_ratio=0.4)
    params = h.LEARNED_PARAMS
    print(f"parameters: K={params.stiffness} N/m  B={params.damping} N·s/m  "
          f"t_f={params.forecast_time} s  f_r={params.release_force} N\n")

    for factory in (h.scenario_static, h.scenario_id, h.scenario_ood,
                    h.scenario_away):
        sc = factory(seed=4)
        r = h.rollout(ctx, params, sc, seed=4)
        outcome = (f"released at {r.handover_time:.2f} s"
                   if r.released else "timed out (no release)")
        print(f"  {sc.name:7s}: {outcome:28s} tracking rmse {r.tracking_rmse:.3f} m"
              f"  peak |F| {r.max_force:.1f} N")

    print("\nforecast-time sweep on the in-distribution scenario:")
    sc = h.scenario_id(seed=4)
    for tf in (0.0, 0.14, 0.3):
        p = h.HandoverParams(params.stiffness, params.damping, tf,
                             params.release_force)
        r = h.rollout(ctx, p, sc, seed=4)
        t = f"{r.handover_time:.2f} s" if r.released else "timeout"
        print(f"  t_f={tf:.2f}: handover {t}, tracking rmse {r.tracking_rmse:.3f} m")

    d = h.rollout_to_dict(h.rollout(ctx, params, h.scenario_id(seed=4), seed=4))
    print(f"\nserialized rollout keys: {sorted(d)}")
