"""Acceptance gate: one test and one printed verdict line per criterion.

Every criterion is evaluated at its stated tolerance and prints exactly
one line ``criterion NN (name): PASS|FAIL`` together with the elapsed
time; runtime budgets are soft and reported, never asserted.

Two criteria fail on this parameter range and are kept failing on
purpose: the partial-trace deviation (criterion 05) and the diagonal
pairing (criterion 09) decay at roughly twice log q, which satisfies the
one-sided upper bound the library enforces but falls outside the
two-sided 15% band those criteria additionally demand.  The verdict
lines and the serialized reports document the measured rates.
"""

import itertools
import math
import time

import numpy as np
import pytest

from onplus.cli import main
from onplus.coupled_backend import CoupledBackend
from onplus.estimates import (
    DecayReport,
    alpha_pq,
    default_vectors,
    key_estimate_sweep,
    mixing_partial_sums,
    partial_trace_convergence,
    projection_defect_sweep,
    random_orthonormal_pair,
    spectral_density,
    trace_rotation_sweep,
)
from onplus.fourier import character, coefficient, haar_state, multiply
from onplus.intertwiners import kappa
from onplus.qcore import catalan, chebyshev_T, make_params, quantum_dim, semicircle_moment
from onplus.tensor_backend import TensorBackend
from onplus.types import CapExceededError, InvariantError
from onplus.weingarten import haar_moment, tensor_word_moment, weingarten_table


def _verdict(index: int, name: str, failures: list[str], start: float, budget: int) -> None:
    elapsed = time.perf_counter() - start
    status = "FAIL" if failures else "PASS"
    print(f"criterion {index:02d} ({name}): {status} [{elapsed:.1f}s, budget {budget}s]")
    assert not failures, f"criterion {index:02d} ({name}): " + "; ".join(failures)


def _coord(dim: int, index: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[index] = 1.0
    return vec


def _band(rate: float, q: float, slack: float = 0.15) -> bool:
    target = math.log(q)
    return (1.0 + slack) * target <= rate <= (1.0 - slack) * target


def _grid_constant(report: DecayReport, q: float, cutoff: int) -> float:
    best = 0.0
    for point, value in report.grid:
        level = max(point)
        if level <= cutoff:
            best = max(best, abs(value) * q**-level)
    return best


def _sweep_or_report(params, n, k, vectors, backend, **kwargs):
    """Run the pairing sweep, tolerating only the fitted-rate invariant."""
    try:
        return key_estimate_sweep(params, n, k, vectors, 6, backend=backend, **kwargs), None
    except InvariantError as err:
        if isinstance(err.report, DecayReport):
            return err.report, str(err)
        raise


@pytest.fixture(scope="module")
def canonical_sweeps(params3, coupled3):
    out = {}
    for n in (1, 2):
        vectors = default_vectors(params3, n, n, backend=coupled3)
        out[n] = _sweep_or_report(params3, n, n, vectors, coupled3)
    return out


def test_criterion_01_dimension_identities():
    start, failures = time.perf_counter(), []
    for N in (3, 4, 5):
        params = make_params(N)
        tb = TensorBackend(params)
        cb = CoupledBackend(params)
        exact_prev, exact = 0, 1
        for n in range(9):
            closed = quantum_dim(params, n)
            recursion = float(chebyshev_T(n, float(N)))
            if abs(recursion - closed) / exact > 1e-9 or abs(closed - exact) / exact > 1e-9:
                failures.append(f"closed form vs recursion at N={N}, n={n}")
            if cb.dim(n) != exact:
                failures.append(f"integer dimension at N={N}, n={n}")
            try:
                trace = tb.trace(n)
            except CapExceededError:
                trace = None
            if trace is not None and abs(trace - exact) / exact > 1e-8:
                failures.append(
                    f"Tr(P_n) vs d_n at N={N}, n={n}: {abs(trace - exact) / exact:.2e}"
                )
            exact_prev, exact = exact, N * exact - exact_prev
    _verdict(1, "dimension identities", failures, start, budget=120)


def test_criterion_02_wenzl_recursion_suite(params3, tensor3):
    start, failures = time.perf_counter(), []
    rng = np.random.default_rng(20)
    for n in range(2, 7):
        forms = {
            "full": tensor3.dense_full(n),
            "reduced": tensor3.dense_reduced(n),
            "reflected": tensor3.dense_reflected(n),
        }
        ambient = params3.N**n
        for _ in range(20):
            probe = rng.standard_normal(ambient) + 1j * rng.standard_normal(ambient)
            reference = tensor3.jw_apply(n, probe)
            scale = float(np.linalg.norm(probe))
            for name, dense in forms.items():
                err = float(np.linalg.norm(dense @ probe - reference)) / scale
                if err > 1e-9:
                    failures.append(f"{name} form at n={n}: {err:.2e}")
    _verdict(2, "wenzl recursion suite", failures, start, budget=120)


def test_criterion_03_oracle_equivalence(params3, coupled3):
    start, failures = time.perf_counter(), []
    N = params3.N
    letters = {
        (r, c): coefficient(params3, 1, _coord(N, r), _coord(N, c))
        for r in range(N)
        for c in range(N)
    }

    # Degrees 2 and 4 exhaustively; the letter pairs are cached so the
    # degree-4 grid costs one product per pair of pairs.
    worst = 0.0
    pair_products = {}
    for a, ea in letters.items():
        for b, eb in letters.items():
            product = multiply(params3, ea, eb, backend=coupled3)
            pair_products[a, b] = product
            worst = max(worst, abs(haar_state(product) - haar_moment(params3, [a, b])))
    if worst > 1e-10:
        failures.append(f"degree-2 moments: worst {worst:.2e}")
    worst = 0.0
    for left, eleft in pair_products.items():
        for right, eright in pair_products.items():
            value = haar_state(multiply(params3, eleft, eright, backend=coupled3))
            worst = max(worst, abs(value - haar_moment(params3, [*left, *right])))
    if worst > 1e-10:
        failures.append(f"degree-4 moments: worst {worst:.2e}")

    # Degrees 6 and 8 on seeded random words, folded from the cached pairs.
    rng = np.random.default_rng(3)
    for degree, count in ((6, 40), (8, 40)):
        worst = 0.0
        for _ in range(count):
            word = [(int(rng.integers(N)), int(rng.integers(N))) for _ in range(degree)]
            element = pair_products[word[0], word[1]]
            for pos in range(2, degree, 2):
                element = multiply(
                    params3, element, pair_products[word[pos], word[pos + 1]], backend=coupled3
                )
            worst = max(worst, abs(haar_state(element) - haar_moment(params3, word)))
        if worst > 1e-10:
            failures.append(f"degree-{degree} sample: worst {worst:.2e}")

    # Catalan moments of the single character by three routes.
    chi = character(params3, 1)
    power = character(params3, 0)
    for m in range(1, 5):
        power = multiply(params3, power, chi, backend=coupled3)
        power = multiply(params3, power, chi, backend=coupled3)
        expected = float(catalan(m))
        fusion = haar_state(power).real
        if abs(fusion - expected) > 1e-10:
            failures.append(f"fusion route at m={m}")
        if abs(semicircle_moment(lambda s, m=m: s ** (2 * m)) - expected) > 1e-8:
            failures.append(f"quadrature route at m={m}")
        table = weingarten_table(params3, m)
        collapsed = sum(
            wg_entry * gram_entry
            for wg_row, gram_row in zip(table.wg, table.gram)
            for wg_entry, gram_entry in zip(wg_row, gram_row)
        )
        if abs(float(collapsed) - expected) > 1e-12:
            failures.append(f"weingarten route at m={m}")
    # Certify the collapsed identity against brute enumeration where cheap.
    for m in (1, 2):
        total = sum(
            haar_moment(params3, [(i, i) for i in idx])
            for idx in itertools.product(range(N), repeat=2 * m)
        )
        if abs(total - float(catalan(m))) > 1e-10:
            failures.append(f"enumerated weingarten route at m={m}")
    _verdict(3, "oracle equivalence", failures, start, budget=300)


def test_criterion_04_rotation_trace(params3, coupled3):
    start, failures = time.perf_counter(), []
    try:
        report = trace_rotation_sweep(params3, 5, 100, backend=coupled3, seed=424242)
    except InvariantError as err:
        failures.append(str(err))
        report = None
    if report is not None:
        for k, worst_trace, worst_excess in report.rotation_grid:
            if worst_trace > 1e-9:
                failures.append(f"trace identity at k={k}: {worst_trace:.2e}")
            if worst_excess > 1e-12:
                failures.append(f"HS-norm excess at k={k}: {worst_excess:.2e}")
    _verdict(4, "rotation trace identity", failures, start, budget=120)


def test_criterion_05_partial_trace_convergence(params3, coupled3):
    start, failures = time.perf_counter(), []
    reports = {}
    for b_max in (5, 6):
        try:
            reports[b_max] = partial_trace_convergence(params3, 1, 1, b_max, backend=coupled3)
        except InvariantError as err:
            if not isinstance(err.report, DecayReport):
                raise
            reports[b_max] = err.report
    rate = reports[6].fitted_rate
    if not _band(rate, params3.q):
        failures.append(
            f"deviation decays at rate {rate:.4f}, outside the 15% band around "
            f"{math.log(params3.q):.4f}"
        )
    d5, d6 = reports[5].empirical_constant, reports[6].empirical_constant
    if not (d6 / 2 <= d5 <= 2 * d6):
        failures.append(f"constant unstable: {d5:.4f} vs {d6:.4f}")
    _verdict(5, "partial trace convergence", failures, start, budget=300)


def test_criterion_06_insertion_scalars(params3, coupled3):
    start, failures = time.perf_counter(), []
    rng = np.random.default_rng(6)

    def draw(dim):
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return vec / np.linalg.norm(vec)

    checked = []
    for n in range(1, 9):
        result = alpha_pq(params3, n, 0, 1, draw(coupled3.dim(1)), backend=coupled3)
        checked.append(result)
        if abs(result.alpha - 1.0) > 1e-12:
            failures.append(f"trivial insertion at n={n}")
    for n in range(2, 9):
        result = alpha_pq(params3, n, 1, 1, draw(coupled3.dim(2)), backend=coupled3)
        checked.append(result)
        expected = -quantum_dim(params3, n - 2) / quantum_dim(params3, n - 1)
        if abs(result.alpha - expected) > 1e-8:
            failures.append(f"single-strand scalar at n={n}")
    for p, q_label in ((1, 2), (2, 1), (2, 2)):
        for n in range(p + q_label, 7):
            result = alpha_pq(params3, n, p, q_label, draw(coupled3.dim(p + q_label)), backend=coupled3)
            checked.append(result)
            if result.residual > 1e-7:
                failures.append(f"residual at ({p},{q_label};{n}): {result.residual:.2e}")
    for result in checked:
        if not 0.0 < abs(result.alpha) <= 1.0 + 1e-9:
            failures.append(f"scalar magnitude {abs(result.alpha):.6f} outside (0, 1]")
    _verdict(6, "insertion scalars", failures, start, budget=300)


def test_criterion_07_projection_products(params3, coupled3):
    start, failures = time.perf_counter(), []
    try:
        report = projection_defect_sweep(params3, 1, 1, range(1, 6), backend=coupled3)
    except InvariantError as err:
        failures.append(str(err))
        report = err.report if isinstance(err.report, DecayReport) else None
    if report is not None and not _band(report.fitted_rate, params3.q):
        failures.append(f"defect decay rate {report.fitted_rate:.4f} outside the band")
    _verdict(7, "projection products", failures, start, budget=300)


def test_criterion_08_pair_insertion_normalization(params3, coupled3):
    start, failures = time.perf_counter(), []
    peaks = []
    for a in (0, 1, 2):
        values = []
        for l in range(max(a, 1), 7):
            result = kappa(params3, l, l, 2 * l - 2 * a, backend=coupled3)
            if result.residual > 1e-8:
                failures.append(f"scalarity at a={a}, l={l}: {result.residual:.2e}")
            values.append(result.kappa)
        if any(later < earlier - 1e-9 for earlier, later in zip(values, values[1:])):
            failures.append(f"kappa not monotone in l at a={a}")
        peaks.append(max(values) if a else 1.0)
    slope = abs(np.polyfit([0, 1, 2], np.log(peaks), 1)[0])
    target = abs(math.log(params3.q)) / 2.0
    if abs(slope - target) > 0.2 * target:
        failures.append(f"growth exponent {slope:.4f} vs q^(-a/2) target {target:.4f}")
    _verdict(8, "pair-insertion normalization", failures, start, budget=180)


def test_criterion_09_key_estimate(params3, coupled3, canonical_sweeps):
    start, failures = time.perf_counter(), []
    cases = []
    for n in (1, 2):
        cases.append((f"n=k={n} coordinate pair", *canonical_sweeps[n]))
        dim = coupled3.dim(n)
        for i in range(5):
            rng = np.random.default_rng(100 + i)
            xi, eta = random_orthonormal_pair(rng, dim)
            xi_p, eta_p = random_orthonormal_pair(rng, dim)
            report, error = _sweep_or_report(
                params3, n, n, (xi, eta, xi_p, eta_p), coupled3
            )
            cases.append((f"n=k={n} seeded pair {i}", report, error))

    for name, report, _ in cases:
        k5 = _grid_constant(report, params3.q, 5)
        k6 = _grid_constant(report, params3.q, 6)
        if not np.isfinite(k6) or k6 > 2.0 * k5:
            failures.append(f"{name}: constant unstable ({k5:.4f} -> {k6:.4f})")
        if not _band(report.fitted_rate, params3.q):
            failures.append(
                f"{name}: diagonal rate {report.fitted_rate:.4f} outside the 15% band"
            )

    # Negative control: coinciding vectors must not decay along the diagonal.
    xi = default_vectors(params3, 1, 1, backend=coupled3)[0]
    with pytest.raises(InvariantError, match="slower") as excinfo:
        key_estimate_sweep(
            params3, 1, 1, (xi, xi, xi, xi), 6, backend=coupled3,
            check_orthogonality=False,
        )
    control = excinfo.value.report
    if control.fitted_rate < -0.15:
        failures.append(f"negative control decayed at {control.fitted_rate:.4f}")
    diag = {point: abs(value) for point, value in control.grid if point[0] == point[1]}
    if diag[(6, 6)] < 0.3 * diag[(0, 0)]:
        failures.append("negative control grid decayed")
    _verdict(9, "key estimate", failures, start, budget=900)


def test_criterion_10_mixing_sum(params3, coupled3, canonical_sweeps):
    start, failures = time.perf_counter(), []
    ratio_cap = 1.2 * params3.q

    # The shell increments come straight from the criterion-9 pairing grids,
    # summed per shell rather than differenced, so parity shells stay at
    # their true near-zero size instead of picking up cancellation noise.
    totals = {}
    for n in (1, 2):
        report, _ = canonical_sweeps[n]
        shells = [0.0] * 7
        for point, value in report.grid:
            shells[max(point)] += abs(value) ** 2
        total = sum(shells)
        totals[n] = total
        kept = [shell for shell in shells if shell > 1e-20 * total]
        for earlier, later in zip(kept, kept[1:]):
            if later / earlier > ratio_cap:
                failures.append(
                    f"n=k={n}: increment ratio {later / earlier:.4f} above {ratio_cap:.4f}"
                )
        if kept[-1] > 1e-2 * total:
            failures.append(f"n=k={n}: partial sums did not plateau")

    # The library partial sums must agree with the reconstruction.
    partials = mixing_partial_sums(
        params3, 1, 1, default_vectors(params3, 1, 1, backend=coupled3), 6, backend=coupled3
    )
    if abs(partials[-1] - totals[1]) > 1e-12:
        failures.append("partial sums disagree with the pairing grid")
    _verdict(10, "mixing sum", failures, start, budget=300)


def test_criterion_11_spectral_density(params3, coupled3):
    start, failures = time.perf_counter(), []
    axis = np.linspace(-2.0, 2.0, 21)
    points = [(float(s), float(t)) for s in axis for t in axis]
    vectors = default_vectors(params3, 1, 1, backend=coupled3)
    try:
        report = spectral_density(params3, 1, 1, vectors, 6, points, backend=coupled3)
    except InvariantError as err:
        failures.append(str(err))
        report = err.report
    if report is not None:
        coeffs = np.asarray(report.coefficients)
        if np.abs(coeffs.imag).max() > 1e-10 or np.abs(coeffs - coeffs.T).max() > 1e-10:
            failures.append("coefficient matrix is not hermitian-consistent")
        if report.fitted_rate > math.log(1.5 * params3.q) + 1e-9:
            failures.append(f"increments converge at {report.fitted_rate:.4f}, not geometric")
        if abs(report.mass - report.mass_expected) > 1e-4:
            failures.append(f"density mass {report.mass:.6f} vs {report.mass_expected:.6f}")
        if abs(report.mass_expected * 3.0 - 1.0) > 1e-12:
            failures.append("expected mass is not 1/3")
    _verdict(11, "spectral density", failures, start, budget=600)


def test_criterion_12_backend_cross_certification(params3, tensor3, coupled3):
    start, failures = time.perf_counter(), []
    for n in range(7):
        if abs(tensor3.trace(n) - coupled3.dim(n)) / coupled3.dim(n) > 1e-8:
            failures.append(f"projector trace vs integer dimension at n={n}")
    rng = np.random.default_rng(12)
    for n in range(1, 6):
        embedding = coupled3.chain_embedding(n)
        for _ in range(3):
            ambient = params3.N**n
            probe = rng.standard_normal(ambient) + 1j * rng.standard_normal(ambient)
            tensor_value = complex(np.vdot(probe, tensor3.jw_apply(n, probe))).real
            coupled_value = float(np.linalg.norm(embedding.conj().T @ probe) ** 2)
            if abs(tensor_value - coupled_value) / np.linalg.norm(probe) ** 2 > 1e-8:
                failures.append(f"projected overlap at n={n}")
    for labels in ((1, 1), (1, 2), (2, 2), (2, 1, 1)):
        element = character(params3, 0)
        letters = []
        for n in labels:
            dim = coupled3.dim(n)
            xi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            eta = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            element = multiply(params3, element, coefficient(params3, n, xi, eta), backend=coupled3)
            chain = coupled3.chain_embedding(n)
            letters.append((chain @ xi, chain @ eta))
        got = haar_state(element)
        want = tensor_word_moment(params3, letters)
        if abs(got - want) > 1e-8 * max(1.0, abs(want)):
            failures.append(f"moment of labels {labels}: {abs(got - want):.2e}")
    _verdict(12, "backend cross-certification", failures, start, budget=120)


def test_criterion_13_determinism(tmp_path):
    start, failures = time.perf_counter(), []
    codes, trees = [], []
    for run in ("first", "second"):
        out = tmp_path / run
        codes.append(main(["all", "--N", "3", "--seed", "42", "--out", str(out)]))
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    if codes[0] != codes[1]:
        failures.append(f"exit codes differ: {codes}")
    if sorted(trees[0]) != sorted(trees[1]):
        failures.append("report file sets differ")
    else:
        for name in trees[0]:
            if trees[0][name] != trees[1][name]:
                failures.append(f"{name} differs between runs")
    if not trees[0]:
        failures.append("no report files were written")
    _verdict(13, "determinism", failures, start, budget=2700)
