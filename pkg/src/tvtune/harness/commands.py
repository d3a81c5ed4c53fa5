"""Experiment commands behind the CLI. Each returns the rows it wrote."""
from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from .. import baselines
from ..controller import ControllerConfig
from ..ddpg import Hyperparams, load_policy, save_policy, train
from ..dynamics import TireParams, VehicleParams
from ..env import DriverProfile, EpisodeConfig, TorqueVectoringEnv, run_fixed
from ..errors import ConfigError
from . import csvio
from .config import RunConfig

log = logging.getLogger(__name__)

TUNERS = ("ddpg", "ga", "manual")
GENERALIZATION_SCENARIO = dict(mu=0.3, v0=80.0)


class Setup:
    """Resolved objects for one run."""

    def __init__(self, cfg: RunConfig | None = None):
        cfg = cfg or RunConfig()
        self.cfg = cfg
        self.vehicle = cfg.build("vehicle") if "vehicle" in cfg.overrides else VehicleParams()
        self.controller = (cfg.build("controller") if "controller" in cfg.overrides
                           else ControllerConfig())
        tire_kw = cfg.section("tire")
        if "normal_force" not in tire_kw:
            tire_kw.pop("mu", None)
            self.tire = TireParams.for_vehicle(self.vehicle, **tire_kw)
        else:
            self.tire = cfg.build("tire")
        self.hp = cfg.build("ddpg") if "ddpg" in cfg.overrides else Hyperparams()
        ga_kw = cfg.section("ga")
        ga_kw.setdefault("seed", cfg.seed)
        try:
            self.ga = baselines.GaConfig(**ga_kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[ga] {exc}") from None
        ep = cfg.episode
        self.speed_range = (ep("speed_min", 80.0), ep("speed_max", 130.0))
        self.mu_range = (ep("mu_min", 0.4), ep("mu_max", 0.6))
        self.reward_mode = ep("reward_mode", "instant")
        self.ramp = ep("torque_ramp", 0.3)
        self.handwheel = ep("handwheel_deg", 5.0)
        self.timing = dict(episode_length=ep("episode_length", 15.0),
                           agent_sample_time=ep("agent_sample_time", 0.5),
                           sim_dt=ep("sim_dt", 1e-3))

    def profile(self, generalization=False) -> DriverProfile:
        if generalization:
            return DriverProfile.generalization(ramp=self.ramp)
        return DriverProfile.training(self.handwheel, ramp=self.ramp)

    def scenario(self, mu, v0, generalization=False) -> EpisodeConfig:
        try:
            return EpisodeConfig(initial_speed=float(v0), mu=float(mu),
                                 maneuver=self.profile(generalization), **self.timing)
        except ConfigError as exc:
            raise ConfigError(f"scenario mu={mu}, v0={v0}: {exc}") from None

    def make_env(self, seed) -> TorqueVectoringEnv:
        base = EpisodeConfig(maneuver=self.profile(), **self.timing)
        return TorqueVectoringEnv(self.vehicle, self.controller, self.tire, base, seed,
                                  self.speed_range, self.mu_range, self.reward_mode)

    def rollout(self, scenario, w_df=None, policy=None, record_trace=False):
        env = TorqueVectoringEnv(self.vehicle, self.controller, self.tire, scenario,
                                 record_trace=record_trace)
        return run_fixed(w_df, scenario, self.vehicle, self.controller, policy,
                         record_trace, env=env)

    def ga_tune(self, scenario):
        return baselines.ga_tune([scenario], self.ga, self.vehicle, self.controller,
                                 tire=self.tire)


def _check_out_dir(out) -> Path:
    if out is None:
        raise ConfigError("an output location is required (--out)")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_train(cfg: RunConfig, episodes: int | None = None):
    """Train, then write ``actor.txt`` and ``rewards.csv`` under ``cfg.out``."""
    out = _check_out_dir(cfg.out)
    setup = Setup(cfg)
    result = train(setup.make_env, setup.hp, cfg.seed, episodes=episodes,
                   progress=lambda ep, r: log.info("episode %d reward %.6g", ep, r))
    h = result.rewards
    rows = [(i, float(h[i]), float(np.mean(h[max(0, i - 49):i + 1]))) for i in range(len(h))]
    save_policy(result.policy, out / "actor.txt")
    csvio.write_csv(out / "rewards.csv", csvio.REWARDS, rows)
    return result, rows


def _grid_values(text: str):
    """'a:b:c' (start:step:stop inclusive) or a comma list."""
    try:
        if ":" in text:
            a, step, b = (float(v) for v in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 10) for i in range(n)]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad grid values {text!r}") from None


def parse_grid(items):
    axes = {"mu": [0.4], "v0": [100.0]}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"grid axis {item!r} must look like name=start:step:stop")
        name, text = item.split("=", 1)
        name = name.strip()
        if name not in axes:
            raise ConfigError(f"unknown grid axis {name!r}; use mu or v0")
        axes[name] = _grid_values(text)
    return axes


def parse_scenario(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"bad scenario item {part!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        if k not in ("mu", "v0"):
            raise ConfigError(f"unknown scenario key {k!r}")
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigError(f"bad number for {k}: {v!r}") from None
    if set(out) != {"mu", "v0"}:
        raise ConfigError("scenario needs both mu and v0")
    return out


def _load_model(path):
    if path is None:
        raise ConfigError("this tuner needs a trained model (--model)")
    return load_policy(path)


def cmd_sweep(cfg: RunConfig, grid, tuners=TUNERS, out_file=None):
    """Evaluate each tuner on every (mu, v0) cell of the grid."""
    setup = Setup(cfg)
    unknown = set(tuners) - set(TUNERS)
    if unknown:
        raise ConfigError(f"unknown tuner(s): {', '.join(sorted(unknown))}")
    policy = _load_model(cfg.model) if "ddpg" in tuners else None
    rows = []
    for mu in grid["mu"]:
        for v0 in grid["v0"]:
            sc = setup.scenario(mu, v0)
            for tuner in TUNERS:
                if tuner not in tuners:
                    continue
                w, pol = None, None
                if tuner == "manual":
                    w = baselines.manual_w_df()
                elif tuner == "ga":
                    w = setup.ga_tune(sc).best.genes
                else:
                    pol = policy
                env, s = setup.rollout(sc, w, pol)
                wv = w if w is not None else np.full(4, np.nan)
                rows.append((mu, v0, tuner, s["max_abs_ex"], s["terminated"],
                             s["perf_integral"], *[float(v) for v in wv]))
                log.info("mu=%.3g v0=%.4g %s max|ex|=%.1f", mu, v0, tuner, s["max_abs_ex"])
    if out_file is not None:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        csvio.write_csv(out_file, csvio.SWEEP, rows)
    return rows


def _max_beta_deg(env) -> float:
    """Largest |sideslip| over the trace rows and the final state."""
    tr = env.trace_array()
    vx = np.append(tr[:, 1], env.x[0])
    vy = np.append(tr[:, 2], env.x[1])
    return float(np.degrees(np.max(np.abs(np.arctan(vy / vx)))))


def cmd_generalize(cfg: RunConfig, tuners=TUNERS, ga_scenario=None, out_dir=None):
    """Step steer on mu=0.3 at 80 km/h for each tuner; summary plus per-tuner traces.

    GA weights are tuned offline on ``ga_scenario`` (default mu=0.4, v0=100
    with the training profile) since the GA cannot adapt to a surface it has
    not been tuned on.
    """
    setup = Setup(cfg)
    policy = _load_model(cfg.model) if "ddpg" in tuners else None
    mu, v0 = GENERALIZATION_SCENARIO["mu"], GENERALIZATION_SCENARIO["v0"]
    sc = setup.scenario(mu, v0, generalization=True)
    gsc = ga_scenario or dict(mu=0.4, v0=100.0)
    rows, traces = [], {}
    for tuner in TUNERS:
        if tuner not in tuners:
            continue
        w, pol = None, None
        if tuner == "manual":
            w = baselines.manual_w_df()
        elif tuner == "ga":
            w = setup.ga_tune(setup.scenario(gsc["mu"], gsc["v0"])).best.genes
        else:
            pol = policy
        env, s = setup.rollout(sc, w, pol, record_trace=True)
        rows.append((tuner, mu, v0, not s["terminated"], _max_beta_deg(env),
                     s["max_abs_ex"], s["perf_integral"], s["time"]))
        traces[tuner] = env.trace_array()
    if out_dir is not None:
        out = _check_out_dir(out_dir)
        csvio.write_csv(out / "generalize_summary.csv", csvio.GENERALIZE, rows)
        for tuner, tr in traces.items():
            csvio.write_csv(out / f"trace_{tuner}.csv", csvio.TRACE, [tuple(r) for r in tr])
    return rows, traces


def cmd_eval(cfg: RunConfig, scenario: dict, tuner: str = "ddpg", out_file=None):
    """One episode on one scenario with the training profile; writes its trace."""
    setup = Setup(cfg)
    if tuner not in TUNERS or tuner == "ga":
        raise ConfigError("eval supports the ddpg and manual tuners")
    sc = setup.scenario(scenario["mu"], scenario["v0"])
    if tuner == "manual":
        env, s = setup.rollout(sc, baselines.manual_w_df(), record_trace=True)
    else:
        env, s = setup.rollout(sc, policy=_load_model(cfg.model), record_trace=True)
    rows = [tuple(r) for r in env.trace_array()]
    if out_file is not None:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        csvio.write_csv(out_file, csvio.TRACE, rows)
    return s, rows


def cmd_ga_tune(cfg: RunConfig, scenario: dict, out_file=None):
    setup = Setup(cfg)
    res = setup.ga_tune(setup.scenario(scenario["mu"], scenario["v0"]))
    rows = [(g, f, *[float(v) for v in genes]) for g, (f, genes) in
            enumerate(zip(res.best_per_generation, res.best_genes_per_generation))]
    if out_file is not None:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        csvio.write_csv(out_file, csvio.GA_TRACE, rows)
    return res, rows
