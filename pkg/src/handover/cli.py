"""Command-line entry points: data generation, evaluation, rollouts,
preference simulation, and the HTTP service.

Every subcommand writes a machine-readable JSON report (to --out or stdout)
and exits nonzero on any error.
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import config as cfgmod
from . import dataset as ds
from .evaluation import run_kfold_eval, run_sample_efficiency, run_tradeoff
from .impedance import (HandoverParams, rollout, rollout_to_dict, scenario_away,
                        scenario_id, scenario_ood, scenario_static)
from .preference import ActionGrid
from .prediction import fit_context
from .service import create_app, replay_session_log, simulate_sessions


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


def _fail(message: str) -> None:
    click.echo(json.dumps({"error": message}), err=True)
    sys.exit(1)


def _load_cfg(path: str | None) -> dict:
    return cfgmod.load_config(path) if path else {}


@click.group()
def main():
    """Dynamic handover toolkit."""


@main.command("gen-data")
@click.option("--n-id", default=900, show_default=True)
@click.option("--n-ood", default=100, show_default=True)
@click.option("--rate", default=30.0, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def gen_data(n_id, n_ood, rate, seed, out, config_path):
    """Generate a synthetic handover dataset as JSONL."""
    try:
        cfg = _load_cfg(config_path)
        base = cfgmod.generator_config(cfg) if cfg else ds.GeneratorConfig()
        gen_cfg = replace(base, n_id=n_id, n_ood=n_ood, sample_rate_hz=rate)
        data = ds.generate_synthetic(gen_cfg, seed)
        ds.save(data, out)
    except Exception as e:
        _fail(str(e))
    click.echo(json.dumps({"written": out, "n_pairs": n_id + n_ood, "seed": seed}))


def _eval_inputs(data, config_path, kappa, window):
    cfg = _load_cfg(config_path)
    dataset = ds.load(data)
    sim = cfgmod.sim_config(cfg)
    if kappa is not None:
        sim = replace(sim, kappa=kappa)
    if window is not None:
        sim = replace(sim, window=None if window <= 0 else window)
    return dataset, sim, cfgmod.kernel_params(cfg), cfgmod.prediction_settings(cfg)


@main.group("eval")
def eval_group():
    """Replay evaluations over a dataset file."""


@eval_group.command("kfold")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--k", default=10, show_default=True)
@click.option("--inducing", default=0.4, show_default=True)
@click.option("--kappa", default=None, type=float)
@click.option("--window", default=None, type=int, help="similarity window; 0 = full history")
@click.option("--seed", default=7, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_kfold(data, k, inducing, kappa, window, seed, out, config_path):
    try:
        dataset, sim, kernel, pred = _eval_inputs(data, config_path, kappa, window)
        report = run_kfold_eval(dataset, k=k, seed=seed, inducing_ratio=inducing,
                                sim_config=sim, k_neighbors=pred["k_neighbors"],
                                kernel=kernel)
    except Exception as e:
        _fail(str(e))
    _emit(report.to_dict(), out)


@eval_group.command("sample-eff")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.1,0.25,0.5,1.0", show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--inducing", default=0.4, show_default=True)
@click.option("--kappa", default=None, type=float)
@click.option("--window", default=None, type=int)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_sample_eff(data, ratios, k, inducing, kappa, window, seed, out, config_path):
    try:
        dataset, sim, kernel, pred = _eval_inputs(data, config_path, kappa, window)
        ratio_list = [float(r) for r in ratios.split(",")]
        report = run_sample_efficiency(dataset, ratios=ratio_list, seed=seed, k=k,
                                       inducing_ratio=inducing, sim_config=sim,
                                       k_neighbors=pred["k_neighbors"], kernel=kernel)
    except Exception as e:
        _fail(str(e))
    _emit(report.to_dict(), out)


@eval_group.command("tradeoff")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--inducing-ratios", default="0.1,0.2,0.4,0.7,1.0", show_default=True)
@click.option("--kappa", default=None, type=float)
@click.option("--window", default=None, type=int)
@click.option("--seed", default=7, show_default=True)
@click.option("--max-test-pairs", default=40, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_tradeoff(data, inducing_ratios, kappa, window, seed, max_test_pairs, out,
                  config_path):
    try:
        dataset, sim, kernel, pred = _eval_inputs(data, config_path, kappa, window)
        ratio_list = [float(r) for r in inducing_ratios.split(",")]
        report = run_tradeoff(dataset, inducing_ratios=ratio_list, seed=seed,
                              sim_config=sim, k_neighbors=pred["k_neighbors"],
                              kernel=kernel, max_test_pairs=max_test_pairs)
    except Exception as e:
        _fail(str(e))
    _emit(report.to_dict(), out)


def _parse_params(text: str) -> HandoverParams:
    mapping = {"K": "stiffness", "B": "damping", "tf": "forecast_time",
               "fr": "release_force"}
    vals = {}
    for part in text.split(","):
        key, _, raw = part.partition("=")
        key = key.strip()
        if key not in mapping:
            raise ValueError(f"unknown parameter {key!r}; expected K,B,tf,fr")
        vals[mapping[key]] = float(raw)
    return HandoverParams(**vals)


_SCENARIOS = {"static": scenario_static, "id": scenario_id, "ood": scenario_ood,
              "away": scenario_away}


@main.command("rollout")
@click.option("--params", "params_text", default="K=114.3,B=17.1,tf=0.14,fr=7.1",
              show_default=True)
@click.option("--scenario", "scenario_name",
              type=click.Choice(sorted(_SCENARIOS)), default="id", show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--data", type=click.Path(exists=True),
              help="dataset JSONL for the prediction context; default: small synthetic")
@click.option("--inducing", default=0.4, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def rollout_cmd(params_text, scenario_name, seed, data, inducing, out, config_path):
    """Simulate one closed-loop handover and dump the trace."""
    try:
        cfg = _load_cfg(config_path)
        params = _parse_params(params_text)
        if data:
            dataset = ds.load(data)
        else:
            dataset = ds.generate_synthetic(ds.GeneratorConfig(n_id=60, n_ood=8), seed=11)
        pred = cfgmod.prediction_settings(cfg)
        ctx = fit_context(dataset, inducing_ratio=inducing,
                          kernel=cfgmod.kernel_params(cfg),
                          sim_config=cfgmod.sim_config(cfg),
                          k_neighbors=pred["k_neighbors"])
        scenario = _SCENARIOS[scenario_name](seed=seed)
        chunk, decay = cfgmod.ensemble_settings(cfg)
        result = rollout(ctx, params, scenario, seed=seed,
                         ensemble_chunk=chunk, ensemble_decay=decay)
    except Exception as e:
        _fail(str(e))
    _emit(rollout_to_dict(result), out)


@main.group("prefs")
def prefs():
    """Preference-learning utilities."""


@prefs.command("simulate")
@click.option("--iters", default=20, show_default=True)
@click.option("--seeds", default=50, show_default=True)
@click.option("--sigma", default=0.2, show_default=True,
              help="learner's likelihood noise")
@click.option("--oracle-sigma", default=0.05, show_default=True,
              help="how inconsistently the simulated rater answers")
@click.option("--out", type=click.Path())
def prefs_simulate(iters, seeds, sigma, oracle_sigma, out):
    """Closed-loop sessions against the synthetic oracle."""
    try:
        grid = ActionGrid.default()
        target = np.array([114.3, 17.1, 0.14, 7.1])
        lo = grid.actions.min(axis=0)
        span = grid.actions.max(axis=0) - lo
        target_n = (target - lo) / span

        def utility(action):
            z = (action - lo) / span - target_n
            return float(np.exp(-0.5 * np.sum((z / 0.35) ** 2)))

        report = simulate_sessions(grid, utility, iterations=iters,
                                   seeds=range(seeds), sigma=sigma,
                                   oracle_sigma=oracle_sigma)
    except Exception as e:
        _fail(str(e))
    _emit(report, out)


@prefs.command("replay")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def prefs_replay(log_path, out):
    """Rebuild a session from its JSONL log and report the posterior."""
    try:
        session = replay_session_log(log_path, ActionGrid.default())
        payload = session.state_payload()
        payload["posterior_mean_head"] = [float(v) for v in session.posterior.mean[:8]]
    except Exception as e:
        _fail(str(e))
    _emit(payload, out)


@main.command("serve")
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data", type=click.Path(exists=True),
              help="dataset JSONL for rollouts; default: small synthetic")
@click.option("--inducing", default=0.4, show_default=True)
@click.option("--budget", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--log-dir", type=click.Path())
@click.option("--ui-dir", type=click.Path(exists=True),
              help="static directory with the browser console (mounted at /ui)")
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(port, host, data, inducing, budget, seed, log_dir, ui_dir, config_path):
    """Run the preference service for the browser UI."""
    try:
        import uvicorn

        cfg = _load_cfg(config_path)
        if data:
            dataset = ds.load(data)
        else:
            dataset = ds.generate_synthetic(ds.GeneratorConfig(n_id=60, n_ood=8), seed=11)
        ctx = fit_context(dataset, inducing_ratio=inducing,
                          kernel=cfgmod.kernel_params(cfg),
                          sim_config=cfgmod.sim_config(cfg))
        app = create_app(context=ctx, budget=budget, seed=seed, log_dir=log_dir,
                         ui_dir=ui_dir)
    except Exception as e:
        _fail(str(e))
    click.echo(f"serving on http://{host}:{port}" + ("/ui/" if ui_dir else ""))
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
