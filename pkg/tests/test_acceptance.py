"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.  The GAN ordering
and end-to-end criteria train real models and take several minutes.
"""

import time

import numpy as np
import pytest

from elcgen.env import LaneKeepPolicy, analytic_trigger_step, closing_scenario, run_episode, standard_scenarios
from elcgen.evalsuite import collision_rate, distribution_compare, kappa, run_baseline, shapley_from_table
from elcgen.gan import GanConfig, GanRun, OracleModel, nll_real, variant_configs
from elcgen.mpc import ControllerConfig, solve_qp
from elcgen.nn import grad_check
from elcgen.rng import substream
from elcgen.trajdata import (QuantizerGrid, dequantize, filter_emergency, normalize, resample, synth_corpus,
                             tokenize_corpus)
from elcgen.vaa import GeneratorSource
from elcgen.vaa.train import PolicyTrainer, TrainConfig, evaluate
from cli_cases import deterministic_artifacts, run_pipeline
from gradcheck_cases import CASES, EPS, TOL
from mpc_cases import (applied_input_violations, clamp_problem, grid_oracle, lateral_step_response,
                       overshoot_and_settling, random_box_rate_qp, slsqp_oracle)
from shapley_cases import null_player_table, permutation_oracle, property_residuals, symmetric_pair_table

SEED = 0


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line past pytest's capture, then assert."""
    def emit(number, passed, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
        assert passed, detail
    return emit


# --- shared models ---------------------------------------------------------------

@pytest.fixture(scope="module")
def blm():
    """GA generator trained on the tokenized lane-change corpus, with its real set and κ."""
    t0 = time.perf_counter()
    corpus = filter_emergency(synth_corpus(520, substream(SEED, "corpus")))
    grid, length = QuantizerGrid(), 40
    tokens = tokenize_corpus(corpus, grid, length, mirror=True)
    real = [dequantize(t, grid, 1.0) for t in tokens]
    # κ is fixed from the corpus alone before any training
    kap = kappa(real, substream(SEED, "split"))
    gen_cfg, disc_cfg = variant_configs(grid.vocab_size, "ga", embed=32, hidden=32)
    cfg = GanConfig(seq_len=length, pretrain_epochs=60, pretrain_lr=1e-2, pretrain_lr_final=1e-4,
                    disc_pretrain_steps=5, adv_rounds=2, adv_batch=32, rollouts=8, gen_lr=1e-4, eval_samples=0)
    run = GanRun.create(gen_cfg, disc_cfg, cfg, SEED)
    run.run(tokens)
    dt_ref = float(np.mean([resample(normalize(t), length).dt for t in corpus]))
    return {"gen": run.gen, "grid": grid, "length": length, "real": real, "kappa": kap, "dt": dt_ref,
            "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="module")
def trained_policy(blm):
    source = GeneratorSource(blm["gen"], blm["grid"], blm["dt"], blm["length"])
    t0 = time.perf_counter()
    trainer = PolicyTrainer(TrainConfig(updates=6, guidance=True), source, SEED)
    trainer.train()
    return trainer.policy, source, time.perf_counter() - t0


@pytest.fixture(scope="module")
def policy_eval(trained_policy):
    policy, source, _ = trained_policy
    scenarios = standard_scenarios(100, SEED)
    t0 = time.perf_counter()
    guided = evaluate(policy, source, scenarios, SEED, guidance=True)
    guided_s = time.perf_counter() - t0
    unguided = evaluate(policy, source, scenarios, SEED, guidance=False)
    return {"scenarios": scenarios, "guided": guided, "guided_s": guided_s, "unguided": unguided}


# --- 1. gradients -------------------------------------------------------------------

def test_criterion_1_gradients(report):
    t0 = time.perf_counter()
    errors = {}
    for name, build in CASES.items():
        loss, store = build()
        errors[name] = grad_check(loss, store, eps=EPS, floor=1e-5)[0]
    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = errors[worst] <= TOL and elapsed < 60.0
    report(1, ok, f"max rel err {errors[worst]:.2e} ({worst}) over {len(errors)} cases, {elapsed:.1f}s")


# --- 2. QP solver ----------------------------------------------------------------------

def test_criterion_2_qp_solver(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2025)
    worst_grid, worst_ref, worst_kkt = -np.inf, 0.0, 0.0
    for _ in range(200):
        p, lo, hi = random_box_rate_qp(rng)
        sol = solve_qp(p)
        assert sol.optimal
        # lattice points are feasible, so the lattice can only sit above the optimum
        worst_grid = max(worst_grid, sol.objective - grid_oracle(p, lo, hi))
        ref = slsqp_oracle(p, np.clip(np.zeros(p.n), lo, hi))
        worst_ref = max(worst_ref, abs(sol.objective - ref.fun))
        worst_kkt = max(worst_kkt, sol.kkt_residual)
    clamp = solve_qp(clamp_problem())
    clamp_ok = clamp.x[0] == 1.0 and clamp.objective == 4.0
    elapsed = time.perf_counter() - t0
    ok = worst_grid <= 1e-6 and worst_ref <= 1e-6 and worst_kkt <= 1e-6 and clamp_ok and elapsed < 120.0
    report(2, ok, f"max(J - grid) {worst_grid:.1e}, |J - slsqp| <= {worst_ref:.1e}, kkt <= {worst_kkt:.1e}, "
                  f"clamp u={float(clamp.x[0])} J={float(clamp.objective)}, {elapsed:.1f}s")


# --- 3. MPC feasibility ------------------------------------------------------------------

def test_criterion_3_mpc_feasibility(report):
    t0 = time.perf_counter()
    _, logs = run_baseline("random", standard_scenarios(100, SEED), 100, SEED)
    bounds = ControllerConfig().bounds()
    violations = sum(applied_input_violations(log, bounds) for log in logs)
    times, ys, step_viol, ctrl = lateral_step_response()
    overshoot, settle = overshoot_and_settling(times, ys)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and step_viol == 0 and overshoot <= 0.10 and settle <= 3.0 and elapsed < 300.0
    report(3, ok, f"{violations} violations over {len(logs)} episodes; step overshoot {overshoot:.2%}, "
                  f"settling {settle:.2f}s, {elapsed:.1f}s")


# --- 4. GAN ordering ----------------------------------------------------------------------

def _ordering_run(seed, variant, oracle, corpus, length=20):
    gen_cfg, disc_cfg = variant_configs(32, variant, embed=32, hidden=32)
    cfg = GanConfig(seq_len=length, pretrain_epochs=30, disc_pretrain_steps=300, adv_rounds=20, adv_batch=32,
                    rollouts=8, gen_lr=1e-3, disc_lr=1e-2, disc_steps=5, eval_samples=0)
    run = GanRun.create(gen_cfg, disc_cfg, cfg, seed)

    def score(tag):
        return nll_real(oracle, run.gen.sample(2000, length, substream(seed, "ev", tag)))

    # the generator is frozen while the discriminator pretrains, so this is the MLE checkpoint
    run.run(corpus, stop_after=cfg.pretrain_epochs)
    mle = score(0)
    run.run(corpus)
    return mle, score(1)


def test_criterion_4_gan_ordering(report):
    t0 = time.perf_counter()
    rows = []
    for seed in range(5):
        oracle = OracleModel.random(32, substream(seed, "oracle"), hidden=32, embed=32, init_std=1.0)
        corpus = oracle.sample(500, 20, substream(seed, "corpus"))
        ga_mle, ga_adv = _ordering_run(seed, "ga", oracle, corpus)
        _, van_adv = _ordering_run(seed, "vanilla", oracle, corpus)
        rows.append((ga_mle, ga_adv, van_adv))
    rows = np.array(rows)
    drop = 1.0 - np.median(rows[:, 1]) / np.median(rows[:, 0])
    wins = int(np.sum(rows[:, 1] <= rows[:, 2]))
    elapsed = time.perf_counter() - t0
    ok = drop >= 0.02 and wins >= 4 and elapsed < 1200.0
    report(4, ok, f"median NLL {np.median(rows[:, 0]):.2f} -> {np.median(rows[:, 1]):.2f} ({drop:.1%} drop), "
                  f"GA <= vanilla in {wins}/5 seeds, {elapsed:.0f}s")


# --- 5. trigger exactness -------------------------------------------------------------------

TRIGGER_CASES = [(61.3, 8.0, 0.0), (45.0, 5.2, 0.0), (80.0, 12.5, 3.5), (52.1, 9.0, 3.5), (30.0, 3.1, 0.0),
                 (95.0, 15.0, 0.0)]


def test_criterion_5_trigger_exactness(report):
    t0 = time.perf_counter()
    mismatches, early, spurious = 0, 0, 0
    for gap, dv, lateral in TRIGGER_CASES:
        log = run_episode(closing_scenario(gap=gap, dv=dv, lateral=lateral).to_world(), LaneKeepPolicy(), None,
                          np.random.default_rng(0))
        mismatches += log.trigger_step != analytic_trigger_step(gap, dv, 0.05, lateral=lateral)
        early += sum(1 for r in log.records if r["step"] < (log.trigger_step or 0) and
                     (r["triggered"] or r["ttc"] < 2.5))
    for gap in (5.0, 12.0, 40.0):
        for dv in (0.0, -0.5, -4.0):
            for lateral in (0.0, 3.5):
                log = run_episode(closing_scenario(gap=gap, dv=dv, lateral=lateral).to_world(), LaneKeepPolicy(),
                                  None, np.random.default_rng(0))
                spurious += log.trigger_step is not None
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and early == 0 and spurious == 0 and elapsed < 60.0
    report(5, ok, f"{len(TRIGGER_CASES) - mismatches}/{len(TRIGGER_CASES)} exact first steps, {early} early, "
                  f"{spurious}/18 non-closing triggers, {elapsed:.1f}s")


# --- 6. end-to-end efficacy -------------------------------------------------------------------

def test_criterion_6_end_to_end(report, blm, trained_policy, policy_eval):
    t0 = time.perf_counter()
    ours = collision_rate(policy_eval["guided"]).collision_rate
    rand, _ = run_baseline("random", policy_eval["scenarios"], 100, SEED)
    grid, _ = run_baseline("grid", policy_eval["scenarios"], 225, SEED)
    total = blm["seconds"] + trained_policy[2] + policy_eval["guided_s"] + time.perf_counter() - t0
    ok = ours > rand.collision_rate and policy_eval["guided_s"] < grid.wallclock_s and total < 1800.0
    report(6, ok, f"collision rate {ours:.2f} vs random {rand.collision_rate:.2f}; "
                  f"eval {policy_eval['guided_s']:.1f}s vs 15x15 grid {grid.wallclock_s:.1f}s; "
                  f"{total:.0f}s including GAN and policy training")


# --- 7. behavioral guidance -----------------------------------------------------------------------

def test_criterion_7_guidance(report, policy_eval):
    on = [log.meta["cos_sim_blm"] for log in policy_eval["guided"]]
    off = [log.meta["cos_sim_blm"] for log in policy_eval["unguided"]]
    scored = all(v is not None for v in on + off)
    med_on, med_off = float(np.median(on)), float(np.median(off))
    ok = scored and len(on) == len(off) == 100 and med_on > med_off
    report(7, ok, f"median cos_sim {med_on:.3f} guided vs {med_off:.3f} --no-blm over {len(on)} episodes")


# --- 8. Shapley exactness --------------------------------------------------------------------------

def test_criterion_8_shapley(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(88)
    worst_prop, worst_oracle, tables = 0.0, 0.0, 0
    for n in range(1, 9):
        for _ in range(6):
            table = rng.normal(size=1 << n)
            phi = shapley_from_table(table).phi
            worst_oracle = max(worst_oracle, float(np.max(np.abs(phi - permutation_oracle(table, n)))))
            worst_prop = max(worst_prop, property_residuals(phi, table, n)["efficiency"])
            tables += 1
            if n < 2:
                continue
            i, k = rng.choice(n, 2, replace=False)
            sym = symmetric_pair_table(rng, n, int(i), int(k))
            res = property_residuals(shapley_from_table(sym).phi, sym, n, sym=(int(i), int(k)))
            null = null_player_table(rng, n, int(i))
            res2 = property_residuals(shapley_from_table(null).phi, null, n, null=int(i))
            worst_prop = max(worst_prop, *res.values(), *res2.values())
            tables += 2
    elapsed = time.perf_counter() - t0
    ok = worst_prop <= 1e-9 and worst_oracle <= 1e-9 and elapsed < 60.0
    report(8, ok, f"{tables} tables (n<=8): property residual {worst_prop:.1e}, "
                  f"oracle gap {worst_oracle:.1e}, {elapsed:.1f}s")


# --- 9. determinism ---------------------------------------------------------------------------------

def test_criterion_9_determinism(report, tmp_path):
    codes_a = run_pipeline(str(tmp_path / "a"))
    codes_b = run_pipeline(str(tmp_path / "b"))
    a, b = deterministic_artifacts(str(tmp_path / "a")), deterministic_artifacts(str(tmp_path / "b"))
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = all(c == 0 for c in [*codes_a.values(), *codes_b.values()]) and a and not differing
    report(9, ok, f"{len(a)} CSV/JSONL artifacts over {len(codes_a)} commands, {len(differing)} differ")


# --- 10. distribution fidelity -------------------------------------------------------------------------

def test_criterion_10_distribution(report, blm):
    samples = blm["gen"].sample(2000, blm["length"], substream(SEED, "gen", "fidelity"))
    generated = [dequantize(s, blm["grid"], 1.0) for s in samples]
    dist = distribution_compare(generated, blm["real"])
    kap = blm["kappa"]
    ok = all(dist[ch]["w1"] <= kap[ch] for ch in kap)
    detail = ", ".join(f"W1_{ch} {dist[ch]['w1']:.4f} <= kappa {kap[ch]:.4f}" for ch in kap)
    report(10, ok, detail)
