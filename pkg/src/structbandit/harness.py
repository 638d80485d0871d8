"""Instance generators, seeded experiment runner, and validation suites.

Instances follow three recipes: Bernoulli linear bandits with means
affinely rescaled onto [0.1, 0.9], Bernoulli slope-constrained bandits
with means 0.8 - 0.5 |0.5 - x| at uniform positions, and dispersion
bandits obtained by l1-projecting a uniform simplex draw onto the
constraint set.  The runner simulates (instance, seed, policy) cells with
a counter-based generator keyed per cell and round, so any single round's
reward is reproducible in isolation and runs never share RNG state.

Output rows follow the fixed CSV schema; the normalized regret column
divides by the instance's lower-bound constant times log horizon, falling
back to raw regret (logged) when the constant vanishes.
"""

import configparser
import csv
import logging
import math
import os
import time
import zlib
from collections import namedtuple

import numpy as np

from .core import (DusaObservationLog, RewardMatrix, RewardSupport,
                   best_arm_and_value, gaps)
from .infodual import dual_value, info_distance, kl_chain_decomposition
from .lowerbound import (STATUS_OPTIMAL, _lipschitz_lp, concentration_bound,
                         lower_bound_dual, lower_bound_lipschitz_lp,
                         lower_bound_separable)
from .policies import (dusa_init, dusa_step, klucb_step, ossb_lipschitz_step,
                       ucb1_step)
from .structures import (StructureSpec, classify_arms, feasible_for_spec,
                         project_l1)

logger = logging.getLogger("structbandit")

BERN = RewardSupport([0.0, 1.0])

CSV_HEADER = ("instance_id,seed,policy,t,cum_regret,normalized_regret,"
              "s_t,phase,round_time_us")

STRUCTURES = ("linear", "lipschitz", "dispersion")
DEFAULT_HORIZONS = {"linear": 20_000, "lipschitz": 10_000, "dispersion": 10_000}
POLICY_NAMES = ("dusa", "klucb", "ucb1", "ossb-style", "oracle")


def configure_logging():
    """Map the BANDIT_LOG env var ({error, info, debug}) onto the logger."""
    level = os.environ.get("BANDIT_LOG", "error").strip().lower()
    chosen = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}.get(level)
    if chosen is None:
        chosen = logging.ERROR
        logger.error("unknown BANDIT_LOG value %r, using error", level)
    logger.setLevel(chosen)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        logger.addHandler(handler)


# ------------------------------------------------------------- generators


def gen_linear_instance(seed):
    """10-arm Bernoulli linear instance, means spanning [0.1, 0.9] exactly.

    Features are [a c_hat, b] with c_hat standard normal 4-vectors and the
    single affine pair (a, b) chosen after all draws so the raw means
    c_hat . theta_hat land on the target interval; the hidden parameter is
    [theta_hat, 1].  An all-equal raw draw redraws with seed + 1.
    """
    while True:
        rng = np.random.default_rng(seed)
        theta_hat = rng.standard_normal(4)
        c_hat = rng.standard_normal((10, 4))
        raw = c_hat @ theta_hat
        if raw.max() > raw.min():
            break
        seed += 1
    a = 0.8 / (raw.max() - raw.min())
    b = 0.1 - a * raw.min()
    means = a * raw + b
    spec = StructureSpec.linear(BERN, np.hstack([a * c_hat,
                                                 np.full((10, 1), b)]))
    P = RewardMatrix(np.vstack([1.0 - means, means]), BERN)
    return spec, P


def gen_lipschitz_instance(seed):
    """10 positions uniform on [0, 1]; means 0.8 - 0.5 |0.5 - x|; L = 0.5."""
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, 1.0, size=10)
    means = 0.8 - 0.5 * np.abs(0.5 - pos)
    spec = StructureSpec.lipschitz(BERN, positions=pos, L=0.5)
    P = RewardMatrix(np.vstack([1.0 - means, means]), BERN)
    return spec, P


def gen_dispersion_instance(seed):
    """11-level grid; per-arm bounds 1/11 + U[0, 0.2]; l1-projected columns.

    The raw matrix draws each column uniformly from the simplex by sorted
    uniform spacings; columns already inside the constraint set come back
    from the projection unchanged.
    """
    rng = np.random.default_rng(seed)
    support = RewardSupport(np.arange(11) / 10.0)
    bounds = 1.0 / 11.0 + rng.uniform(0.0, 0.2, size=10)
    spec = StructureSpec.dispersion(support, bounds)
    cols = []
    for _ in range(10):
        u = np.sort(rng.uniform(0.0, 1.0, size=10))
        cols.append(np.diff(np.concatenate([[0.0], u, [1.0]])))
    Q = RewardMatrix(np.column_stack(cols), support)
    return spec, project_l1(spec, Q)


GENERATORS = {"linear": gen_linear_instance,
              "lipschitz": gen_lipschitz_instance,
              "dispersion": gen_dispersion_instance}


# ------------------------------------------------------------ configuration


RunRecord = namedtuple("RunRecord", ["instance_id", "seed", "policy", "t",
                                     "cum_regret", "s_t", "phase",
                                     "round_time_us"])


class ExperimentConfig:
    """Runner inputs: structure, instance and run seeds, horizon, policies.

    policies is a list of (name, params) pairs; params are plain dicts of
    already-coerced values handed to the policy adapters.
    """

    def __init__(self, structure, instance_seeds, seeds, horizon, policies,
                 output, stride=100, arms=10):
        if structure not in STRUCTURES:
            raise ValueError("unknown structure %r" % (structure,))
        instance_seeds = [int(s) for s in instance_seeds]
        seeds = [int(s) for s in seeds]
        if not instance_seeds or not seeds:
            raise ValueError("instance_seeds and seeds must be non-empty")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        horizon = int(horizon)
        arms = int(arms)
        if horizon < arms + 1:
            raise ValueError("horizon must be at least arms + 1")
        if int(stride) < 1:
            raise ValueError("stride must be positive")
        names = [name for name, _ in policies]
        if not names:
            raise ValueError("at least one policy required")
        for name in names:
            if name not in POLICY_NAMES:
                raise ValueError("unknown policy %r" % (name,))
        if "ossb-style" in names and structure != "lipschitz":
            raise ValueError("the ossb-style baseline needs the slope "
                             "structure")
        self.structure = structure
        self.instance_seeds = instance_seeds
        self.seeds = seeds
        self.horizon = horizon
        self.policies = list(policies)
        self.output = output
        self.stride = int(stride)
        self.arms = arms


def _coerce(value):
    low = value.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value.strip()


def load_config(path):
    """Parse the INI experiment file: one [experiment] section plus one
    [policy:<name>] section per policy (parameters as key = value)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError("config file %r not found" % (path,))
    if "experiment" not in parser:
        raise ValueError("config needs an [experiment] section")
    exp = parser["experiment"]
    structure = exp.get("structure", "lipschitz").strip()
    horizon = exp.get("horizon")
    if horizon is None:
        horizon = DEFAULT_HORIZONS.get(structure, 10_000)
    policies = []
    for section in parser.sections():
        if not section.startswith("policy:"):
            continue
        name = section.split(":", 1)[1].strip()
        if name == "ossb":
            name = "ossb-style"
        params = {k: _coerce(v) for k, v in parser[section].items()}
        policies.append((name, params))
    return ExperimentConfig(
        structure=structure,
        instance_seeds=exp.get("instance_seeds", "0").replace(",", " ").split(),
        seeds=exp.get("seeds", "0").replace(",", " ").split(),
        horizon=horizon,
        policies=policies,
        output=exp.get("output", "runs.csv").strip(),
        stride=exp.get("stride", 100),
        arms=exp.get("arms", 10),
    )


# ------------------------------------------------------------------ runner


def make_policy(name, params, spec, P_true):
    """Uniform adapter: returns (log, step) with step(t) -> (arm, phase)."""
    arms = spec.arm_count
    if name == "dusa":
        state = dusa_init(spec, spec.support, arms,
                          eps=float(params.get("eps", 1e-3)),
                          T0=float(params.get("t0", params.get("T0", 2000.0))),
                          strict=bool(params.get("strict", False)))

        def step(t):
            dec = dusa_step(state, t)
            return dec.arm, dec.phase

        return state.log, step

    log = DusaObservationLog(spec.support, arms)
    if name == "klucb":
        def step(t):
            arm = klucb_step(log, t)
            return arm, ("init" if t <= arms else "index")
    elif name == "ucb1":
        def step(t):
            arm = ucb1_step(log, t)
            return arm, ("init" if t <= arms else "index")
    elif name == "ossb-style":
        cache = {}
        gamma = float(params.get("gamma", 0.0))
        eps = float(params.get("eps", 0.01))
        d = spec.metric_closure

        def step(t):
            s0 = log.s
            arm = ossb_lipschitz_step(log, t, spec.L, d, gamma_ossb=gamma,
                                      eps_ossb=eps, cache=cache)
            if t <= arms:
                return arm, "init"
            return arm, ("explore" if log.s > s0 else "exploit")
    elif name == "oracle":
        xstar, _ = best_arm_and_value(P_true)

        def step(t):
            return xstar, "exploit"
    else:
        raise ValueError("unknown policy %r" % (name,))
    return log, step


def _cell_key(instance_seed, run_seed, policy):
    ss = np.random.SeedSequence(
        (int(instance_seed), zlib.crc32(policy.encode()), int(run_seed)))
    return ss.generate_state(2, np.uint64)


def _one_run(instance_id, instance_seed, spec, P_true, policy, params,
             run_seed, horizon, stride):
    log, step = make_policy(policy, params, spec, P_true)
    key = _cell_key(instance_seed, run_seed, policy)
    g = gaps(P_true)
    levels = np.asarray(spec.support.values, dtype=float)
    cdfs = np.cumsum(P_true.probs, axis=0)
    top = len(levels) - 1
    cum = 0.0
    for t in range(1, horizon + 1):
        start = time.perf_counter()
        try:
            arm, phase = step(t)
        except Exception:
            logger.exception("policy %s aborted at t=%d on %s (seed %d)",
                             policy, t, instance_id, run_seed)
            yield RunRecord(instance_id, run_seed, policy, t, cum, log.s,
                            "error", 0.0)
            return
        elapsed_us = (time.perf_counter() - start) * 1e6
        # one counter-indexed uniform per round: cell (instance, seed,
        # policy, t) is reproducible without replaying the run
        u = np.random.Generator(
            np.random.Philox(counter=t, key=key)).random()
        ridx = min(int(np.searchsorted(cdfs[:, arm], u, side="right")), top)
        log.record(arm, float(levels[ridx]))
        cum += float(g[arm])
        if t % stride == 0 or t == horizon:
            yield RunRecord(instance_id, run_seed, policy, t, cum, log.s,
                            phase, elapsed_us)


def run_experiment(config):
    """Stream RunRecords for every (instance, policy, seed) cell."""
    gen = GENERATORS[config.structure]
    for iseed in config.instance_seeds:
        spec, P_true = gen(iseed)
        instance_id = "%s-%d" % (config.structure, iseed)
        for policy, params in config.policies:
            for run_seed in config.seeds:
                logger.info("running %s / %s / seed %d", instance_id, policy,
                            run_seed)
                yield from _one_run(instance_id, iseed, spec, P_true, policy,
                                    params, run_seed, config.horizon,
                                    config.stride)


def instance_rates(spec, P, eps=1e-4):
    """Regret constant plus the rate profile behind it; both vanish when
    no arm is deceitful."""
    part = classify_arms(spec, P)
    if not part.deceitful:
        return 0.0, np.zeros(spec.arm_count)
    if spec.kind == "lipschitz":
        value, rates, status = _lipschitz_lp(P, spec.L, spec.metric_closure)
        if status != STATUS_OPTIMAL:
            raise RuntimeError("rate program did not solve: %s" % (status,))
        return value, rates
    res = lower_bound_dual(spec, P, eps)
    return res.value, res.rates.rates


def instance_lower_bound(spec, P, eps=1e-4):
    """The regret constant of the instance (0 without deceitful arms)."""
    return instance_rates(spec, P, eps)[0]


def normalized_regret(record, C, T):
    """cum_regret / (C log T); C at or below 1e-9 falls back to the raw
    regret (the division would be meaningless), flagged through the log."""
    if C < 0:
        raise ValueError("lower bound constant must be nonnegative")
    if C > 1e-9:
        return record.cum_regret / (C * math.log(T))
    logger.debug("%s: vanishing lower bound, raw regret reported",
                 record.instance_id)
    return record.cum_regret


def run_to_csv(config):
    """Run the whole config and write the output CSV; returns row count."""
    bounds = {}
    for iseed in config.instance_seeds:
        spec, P_true = GENERATORS[config.structure](iseed)
        instance_id = "%s-%d" % (config.structure, iseed)
        bounds[instance_id] = instance_lower_bound(spec, P_true)
        logger.info("%s: lower bound %.6f", instance_id, bounds[instance_id])
        if bounds[instance_id] <= 1e-9:
            logger.info("%s: normalized_regret column holds raw regret",
                        instance_id)
    rows = 0
    with open(config.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER.split(","))
        for rec in run_experiment(config):
            norm = normalized_regret(rec, bounds[rec.instance_id],
                                     config.horizon)
            writer.writerow([rec.instance_id, rec.seed, rec.policy, rec.t,
                             "%.10g" % rec.cum_regret, "%.10g" % norm,
                             rec.s_t, rec.phase, "%.1f" % rec.round_time_us])
            rows += 1
    return rows


# ------------------------------------------------------------- validation


def mc_concentration(delta, t, P, trials, seed=0):
    """Monte Carlo tail frequency of the summed information statistic.

    Pulls follow a fixed round-robin schedule for t rounds; the statistic
    is sum_x N(x) I(Phat(x), P(x)).  Returns (frequency, bound).
    """
    rng = np.random.default_rng(seed)
    arms = P.arm_count
    nR = len(P.support)
    counts = np.array([t // arms + (1 if x < t % arms else 0)
                       for x in range(arms)])
    stat = np.zeros(trials)
    for x in range(arms):
        if counts[x] == 0:
            continue
        draws = rng.multinomial(counts[x], P.probs[:, x], size=trials)
        phat = draws / counts[x]
        p = P.probs[:, x]
        live = p > 0
        terms = np.where(phat[:, live] > 0,
                         phat[:, live] * np.log(
                             np.maximum(phat[:, live], 1e-300) / p[live]),
                         0.0)
        stat += counts[x] * terms.sum(axis=1)
    freq = float(np.mean(stat >= delta))
    bound = concentration_bound(delta, t, arms, nR)
    return freq, min(bound, 1.0)


def _suite_duality(seed):
    rng = np.random.default_rng(seed)
    checks = []
    worst = 0.0
    samples = 0
    for _ in range(6):
        means = np.sort(rng.uniform(0.15, 0.85, size=3))[::-1]
        spec = StructureSpec.separable(BERN, 3)
        P = RewardMatrix(np.vstack([1.0 - means, means]), BERN)
        part = classify_arms(spec, P)
        res = lower_bound_dual(spec, P, 1e-3)
        xstar, best = best_arm_and_value(P)
        for xp in part.deceitful:
            for _ in range(40):
                eta = rng.uniform(0.0, 4.0, size=3)
                lam = rng.uniform(0.0, 1.5) * (1 if rng.random() < 0.5 else 0)
                mu = res.duals[xp].scaled(lam)
                lhs = dual_value(eta, xp, P, mu)
                if not np.isfinite(lhs):
                    continue
                cols = np.vstack([1.0 - means, means]).copy()
                lifted = rng.uniform(best + 1e-6, 1.0)
                cols[:, xp] = [1.0 - lifted, lifted]
                drop = rng.uniform(0.0, means[2])
                if xp != 2:
                    cols[:, 2] = [1.0 - drop, drop]
                rhs = sum(eta[y] * info_distance(P.probs[:, y], cols[:, y])
                          for y in range(3) if y != xstar)
                worst = max(worst, lhs - rhs)
                samples += 1
    checks.append(("weak duality on %d sampled pretenders" % samples,
                   worst <= 1e-8, "max violation %.3g" % worst))
    return checks


def _suite_cones(seed):
    checks = []
    ok_proj = True
    ok_fixed = True
    for i in range(10):
        spec, P = gen_dispersion_instance(seed * 101 + i)
        if not feasible_for_spec(spec, P.probs, tol=1e-8):
            ok_proj = False
        again = project_l1(spec, P)
        if np.max(np.abs(again.probs - P.probs)) > 1e-9:
            ok_fixed = False
    checks.append(("dispersion projections feasible", ok_proj, "tol 1e-8"))
    checks.append(("feasible points are projection fixed points", ok_fixed,
                   "tol 1e-9"))
    ok_gen = True
    for i in range(5):
        spec, P = gen_linear_instance(seed * 77 + i)
        if not feasible_for_spec(spec, P.probs, tol=1e-7):
            ok_gen = False
        spec, P = gen_lipschitz_instance(seed * 77 + i)
        if not feasible_for_spec(spec, P.probs, tol=1e-9):
            ok_gen = False
    checks.append(("generated instances satisfy their structures", ok_gen,
                   "linear 1e-7, slope 1e-9"))
    return checks


def _suite_decomposition(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(k))
        q = rng.dirichlet(np.ones(k))
        n = float(rng.integers(1, 50))
        left, right = kl_chain_decomposition(p, q, n)
        worst = max(worst, abs(left - right))
    return [("chain rule on 1000 random pairs", worst <= 1e-10,
             "max gap %.3g" % worst)]


def _suite_lowerbound(seed):
    rng = np.random.default_rng(seed)
    checks = []
    worst = 0.0
    for _ in range(4):
        means = rng.uniform(0.15, 0.85, size=3)
        means[int(rng.integers(0, 3))] = 0.9
        spec = StructureSpec.separable(BERN, 3)
        P = RewardMatrix(np.vstack([1.0 - means, means]), BERN)
        got = lower_bound_dual(spec, P, 1e-4).value
        want = lower_bound_separable(P)
        worst = max(worst, abs(got - want))
    checks.append(("conic value matches per-arm closed form", worst <= 1e-3,
                   "max gap %.3g" % worst))
    spec, P = gen_lipschitz_instance(seed + 3)
    got = lower_bound_dual(spec, P, 1e-4).value
    want = lower_bound_lipschitz_lp(P, spec.L, spec.metric_closure)
    checks.append(("conic value matches the slope rate program",
                   abs(got - want) <= 1e-3, "gap %.3g" % abs(got - want)))
    return checks


def _suite_concentration(seed):
    means = np.array([0.7, 0.5, 0.3])
    P = RewardMatrix(np.vstack([1.0 - means, means]), BERN)
    checks = []
    # summability threshold for the deviation level, then a sharper level
    # where the bound itself drops below one
    for delta, label in ((3.0 * (2 - 1) + 3.0, "at the summability threshold"),
                         (30.0, "at an informative level")):
        freq, bound = mc_concentration(delta, 200, P, trials=10_000, seed=seed)
        checks.append(("tail frequency below the bound " + label,
                       freq <= bound,
                       "delta %.0f freq %.4f vs bound %.4g"
                       % (delta, freq, bound)))
    return checks


VALIDATE_SUITES = {
    "duality": _suite_duality,
    "cones": _suite_cones,
    "decomposition": _suite_decomposition,
    "lowerbound": _suite_lowerbound,
    "concentration": _suite_concentration,
}


def validate(suite, seed=0):
    """Run one named invariant suite; returns [(check, passed, detail)]."""
    if suite not in VALIDATE_SUITES:
        raise ValueError("unknown suite %r (choose from %s)"
                         % (suite, ", ".join(sorted(VALIDATE_SUITES))))
    return VALIDATE_SUITES[suite](seed)
