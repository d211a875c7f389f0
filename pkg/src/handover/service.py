"""HTTP/JSON facade for the interactive preference-tuning loop.

A session walks a human (or the synthetic oracle) through a fixed budget of
A/B comparisons.  Each query pairs two candidate parameter vectors, both
rolled out on the identical scenario and scenario seed so the comparison is
paired; the winner feeds the preference posterior and the next query is
selected from it.  Sessions live in memory with an optional JSONL append
log per session; a log replays to the identical posterior.

The session core is HTTP-free (`PreferenceSession`), so the command-line
simulation drives exactly the same state machine as the browser UI.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .impedance import HandoverParams, rollout, rollout_to_dict, scenario_id
from .preference import (ActionGrid, PreferenceKernel, PreferencePosterior,
                         PreferenceRecord, laplace_posterior, select_query,
                         synthetic_oracle, update)

DEFAULT_BUDGET = 20


class SessionError(RuntimeError):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class QueryPair:
    iteration: int
    index_a: int
    index_b: int
    scenario_seed: int
    rollout_id_a: str | None = None
    rollout_id_b: str | None = None


def _query_seed(session_seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([session_seed, iteration]).generate_state(1)[0])


class PreferenceSession:
    """State machine for one fine-tuning run: query -> preference -> refit.

    Calls within one session are serialized by a lock; a preference is
    accepted only for the currently open query (anything else is a replay
    and rejected with status 409).
    """

    def __init__(self, session_id: str, grid: ActionGrid,
                 kernel: PreferenceKernel = PreferenceKernel(), sigma: float = 0.2,
                 budget: int = DEFAULT_BUDGET, seed: int = 0,
                 rollout_fn=None, log_path: Path | None = None):
        self.id = session_id
        self.grid = grid
        self.budget = budget
        self.seed = seed
        self.rollout_fn = rollout_fn
        self.log_path = Path(log_path) if log_path else None
        self.lock = threading.Lock()
        self.posterior: PreferencePosterior = laplace_posterior((), grid, kernel, sigma)
        self.records: list[PreferenceRecord] = []
        self.query: QueryPair | None = None
        self.rollouts: dict[str, dict] = {}
        self.done = False
        self._log({"event": "created", "session": session_id, "seed": seed,
                   "budget": budget, "grid_size": grid.size, "sigma": sigma,
                   "lengthscale": kernel.lengthscale,
                   "signal_variance": kernel.signal_variance})
        self._open_next_query()

    @property
    def iteration(self) -> int:
        return len(self.records)

    def _log(self, obj: dict) -> None:
        if self.log_path is not None:
            with self.log_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(obj) + "\n")

    def _open_next_query(self) -> None:
        it = self.iteration
        a, b = select_query(self.posterior, rng_seed=_query_seed(self.seed, it))
        q = QueryPair(iteration=it, index_a=a, index_b=b,
                      scenario_seed=_query_seed(self.seed, 10_000 + it))
        if self.rollout_fn is not None:
            ra = self.rollout_fn(self.grid.actions[a], q.scenario_seed)
            rb = self.rollout_fn(self.grid.actions[b], q.scenario_seed)
            q.rollout_id_a = f"{self.id}-{it}-a"
            q.rollout_id_b = f"{self.id}-{it}-b"
            self.rollouts[q.rollout_id_a] = ra
            self.rollouts[q.rollout_id_b] = rb
        self.query = q
        self._log({"event": "query", "iteration": it, "a": a, "b": b,
                   "scenario_seed": q.scenario_seed})

    def _params(self, index: int) -> dict:
        k, b, tf, fr = self.grid.actions[index]
        return HandoverParams(k, b, tf, fr).as_dict()

    def query_payload(self, include_rollouts: bool = True) -> dict:
        q = self.query
        side = lambda idx, rid: {
            "action_index": idx,
            "params": self._params(idx),
            "rollout_id": rid,
            **({"rollout": self.rollouts[rid]} if include_rollouts and rid else {}),
        }
        return {"id": q.iteration,
                "a": side(q.index_a, q.rollout_id_a),
                "b": side(q.index_b, q.rollout_id_b)}

    def state_payload(self) -> dict:
        base = {"session_id": self.id, "iteration": self.iteration,
                "budget": self.budget, "done": self.done}
        if self.done:
            return {**base, **self._final_payload()}
        return {**base, "query": self.query_payload()}

    def _final_payload(self) -> dict:
        inc = self.posterior.incumbent
        mean = self.posterior.mean
        return {"done": True,
                "incumbent": self._params(inc),
                "incumbent_index": int(inc),
                "history": [{"iteration": i, "winner": r.winner, "loser": r.loser}
                            for i, r in enumerate(self.records)],
                "posterior_summary": {
                    "mean_min": float(mean.min()), "mean_max": float(mean.max()),
                    "n_records": len(self.records),
                    "top_indices": [int(i) for i in np.argsort(mean)[::-1][:5]],
                    "mean_sha256": hashlib.sha256(mean.tobytes()).hexdigest(),
                }}

    def submit(self, winner: str, query_id: int | None = None) -> dict:
        with self.lock:
            if winner not in ("a", "b"):
                raise SessionError(400, f"winner must be 'a' or 'b', got {winner!r}")
            if self.done:
                raise SessionError(409, "session already completed")
            if query_id is not None and query_id != self.query.iteration:
                raise SessionError(409, "preference already submitted for this query")
            q = self.query
            win, lose = ((q.index_a, q.index_b) if winner == "a"
                         else (q.index_b, q.index_a))
            record = PreferenceRecord(winner=win, loser=lose)
            self.posterior = update(self.posterior, record)
            self.records.append(record)
            self._log({"event": "preference", "iteration": q.iteration, "winner": winner})
            if self.iteration >= self.budget:
                self.done = True
                self.query = None
                return {"session_id": self.id, "iteration": self.iteration,
                        "budget": self.budget, **self._final_payload()}
            self._open_next_query()
            return {"session_id": self.id, "iteration": self.iteration,
                    "budget": self.budget, "done": False,
                    "query": self.query_payload()}


def replay_session_log(path, grid: ActionGrid, rollout_fn=None) -> PreferenceSession:
    """Rebuild a session from its JSONL log; the replayed posterior is
    identical because query selection and refits are seed-deterministic."""
    events = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    created = next(e for e in events if e["event"] == "created")
    session = PreferenceSession(
        session_id=created["session"] + "-replay", grid=grid,
        kernel=PreferenceKernel(lengthscale=created["lengthscale"],
                                signal_variance=created.get("signal_variance", 1.0)),
        sigma=created["sigma"], budget=created["budget"], seed=created["seed"],
        rollout_fn=rollout_fn, log_path=None)
    for e in events:
        if e["event"] == "preference":
            session.submit(e["winner"], query_id=e["iteration"])
    return session


def simulate_sessions(grid: ActionGrid, true_utility, iterations: int = DEFAULT_BUDGET,
                      seeds=range(50), sigma: float = 0.2,
                      oracle_sigma: float | None = None,
                      kernel: PreferenceKernel = PreferenceKernel(),
                      top_fraction: float = 0.10) -> dict:
    """Closed-loop runs with the synthetic oracle standing in for the human.

    sigma is the learner's likelihood noise; oracle_sigma (default: same)
    controls how consistently the simulated human answers.  Returns per-seed
    incumbents and the fraction of runs whose incumbent's true utility lands
    in the top `top_fraction` of the grid.
    """
    if oracle_sigma is None:
        oracle_sigma = sigma
    utilities = np.array([true_utility(a) for a in grid.actions])
    cutoff = np.quantile(utilities, 1.0 - top_fraction)
    runs = []
    for seed in seeds:
        session = PreferenceSession(session_id=f"sim-{seed}", grid=grid, kernel=kernel,
                                    sigma=sigma, budget=iterations, seed=int(seed))
        while not session.done:
            q = session.query
            rec = synthetic_oracle(q.index_a, q.index_b, grid, true_utility,
                                   oracle_sigma,
                                   seed=_query_seed(int(seed), 20_000 + q.iteration))
            session.submit("a" if rec.winner == q.index_a else "b",
                           query_id=q.iteration)
        inc = session.posterior.incumbent
        runs.append({"seed": int(seed), "incumbent_index": int(inc),
                     "incumbent_utility": float(utilities[inc]),
                     "in_top": bool(utilities[inc] >= cutoff)})
    hits = sum(r["in_top"] for r in runs)
    return {"iterations": iterations, "n_runs": len(runs),
            "top_fraction": top_fraction,
            "success_rate": hits / len(runs) if runs else 0.0,
            "runs": runs}


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def default_rollout_fn(ctx, mass: float = 2.0):
    """Paired rollouts on the in-distribution scenario bank."""
    def fn(action: np.ndarray, scenario_seed: int) -> dict:
        k, b, tf, fr = (float(v) for v in action)
        params = HandoverParams(k, b, tf, fr)
        scenario = scenario_id(seed=scenario_seed % 100_000)
        return rollout_to_dict(rollout(ctx, params, scenario, seed=scenario_seed % 100_000,
                                       mass=mass))
    return fn


def create_app(context=None, grid: ActionGrid | None = None,
               kernel: PreferenceKernel = PreferenceKernel(), sigma: float = 0.2,
               budget: int = DEFAULT_BUDGET, seed: int = 0,
               log_dir=None, rollout_fn=None, ui_dir=None):
    """Build the FastAPI app.  context=None leaves the service unloaded and
    every session endpoint answering 503; ui_dir mounts the browser console
    at /ui."""
    app = FastAPI(title="handover preference service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    grid = grid or ActionGrid.default()
    if rollout_fn is None and context is not None:
        rollout_fn = default_rollout_fn(context)
    sessions: dict[str, PreferenceSession] = {}
    counter = itertools.count()
    store_lock = threading.Lock()
    log_dir = Path(log_dir) if log_dir else None
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)

    def error(status: int, message: str):
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "loaded": rollout_fn is not None}

    @app.post("/sessions", status_code=201)
    def create_session():
        if rollout_fn is None:
            return error(503, "prediction context not loaded")
        with store_lock:
            n = next(counter)
            sid = f"s{n:04d}-{uuid.uuid4().hex[:8]}"
            session = PreferenceSession(
                session_id=sid, grid=grid, kernel=kernel, sigma=sigma,
                budget=budget, seed=seed + n, rollout_fn=rollout_fn,
                log_path=(log_dir / f"{sid}.jsonl") if log_dir else None)
            sessions[sid] = session
        return session.state_payload()

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        session = sessions.get(sid)
        if session is None:
            return error(404, f"unknown session {sid}")
        return session.state_payload()

    @app.post("/sessions/{sid}/preference")
    async def post_preference(sid: str, request: Request):
        session = sessions.get(sid)
        if session is None:
            return error(404, f"unknown session {sid}")
        try:
            body = await request.json()
        except Exception:
            return error(400, "body must be JSON")
        if not isinstance(body, dict) or not isinstance(body.get("winner"), str):
            return error(400, "body must be {'winner': 'a'|'b', 'query_id'?: int}")
        try:
            return session.submit(body["winner"], body.get("query_id"))
        except SessionError as e:
            return error(e.status, e.message)

    @app.get("/rollouts/{rid}")
    def get_rollout(rid: str):
        for session in list(sessions.values()):
            if rid in session.rollouts:
                return session.rollouts[rid]
        return error(404, f"unknown rollout {rid}")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    app.state.sessions = sessions
    app.state.grid = grid
    return app
