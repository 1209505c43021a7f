"""Condensed tracking QP and a dense dual active-set solver."""

from dataclasses import dataclass, field

import numpy as np

from .._accel import kernel
from .model import INPUT_DIM, STATE_DIM, LtvModel

OPTIMAL, INFEASIBLE, MAXITER = 0, 1, 2
STATUS_NAMES = {OPTIMAL: "optimal", INFEASIBLE: "infeasible", MAXITER: "maxiter"}


@dataclass
class InputBounds:
    """Box bounds on u = (a, δ) and s = (x, y, ψ, v), and per-step rate bounds on u."""
    u_min: np.ndarray = field(default_factory=lambda: np.array([-6.0, -0.5]))
    u_max: np.ndarray = field(default_factory=lambda: np.array([3.0, 0.5]))
    du_min: np.ndarray = field(default_factory=lambda: np.array([-1.5, -0.1]))
    du_max: np.ndarray = field(default_factory=lambda: np.array([1.5, 0.1]))
    s_min: np.ndarray = field(default_factory=lambda: np.full(STATE_DIM, -np.inf))
    s_max: np.ndarray = field(default_factory=lambda: np.full(STATE_DIM, np.inf))

    def __post_init__(self):
        for name in ("u_min", "u_max", "du_min", "du_max", "s_min", "s_max"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if np.any(self.u_min > self.u_max) or np.any(self.du_min > self.du_max) or np.any(self.s_min > self.s_max):
            raise ValueError("inconsistent bounds: some min exceeds its max")

    def first_step_interval(self, u_prev):
        """Feasible interval for u_0 given the previous applied input."""
        lo = np.maximum(self.u_min, u_prev + self.du_min)
        hi = np.minimum(self.u_max, u_prev + self.du_max)
        return lo, hi

    def violations(self, u, u_prev, tol=1e-9):
        """Number of box/rate violations of a single applied input."""
        u = np.asarray(u)
        du = u - np.asarray(u_prev)
        bad = (u < self.u_min - tol) | (u > self.u_max + tol) | (du < self.du_min - tol) | (du > self.du_max + tol)
        return int(np.count_nonzero(bad))


@dataclass
class CostWeights:
    V: np.ndarray = field(default_factory=lambda: np.diag([1.0, 10.0, 5.0, 1.0]))
    W: np.ndarray = field(default_factory=lambda: np.diag([0.5, 20.0]))

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=np.float64)
        self.W = np.asarray(self.W, dtype=np.float64)
        if not (np.allclose(self.V, self.V.T) and np.allclose(self.W, self.W.T)):
            raise ValueError("weights must be symmetric")
        if np.linalg.eigvalsh(self.V).min() < -1e-12:
            raise ValueError("V must be positive semidefinite")
        if np.linalg.eigvalsh(self.W).min() <= 0:
            raise ValueError("W must be positive definite")


@dataclass
class QpProblem:
    """min ½xᵀHx + gᵀx + const  s.t.  Cx ≤ d.

    For tracking problems the prediction pieces are kept so the objective can
    be cross-checked by direct simulation: predicted states are
    ``free[k] + Su[k] @ x`` for k = 0..N.
    """
    H: np.ndarray
    g: np.ndarray
    C: np.ndarray
    d: np.ndarray
    const: float = 0.0
    input_shape: tuple = None
    free: np.ndarray = None
    Su: np.ndarray = None
    way: np.ndarray = None
    weights: CostWeights = None
    labels: list = None

    def __post_init__(self):
        n = self.H.shape[0]
        if self.input_shape is None:
            self.input_shape = (n,)
        if self.C.shape != (len(self.d), n):
            raise ValueError("constraint matrix shape mismatch")

    @property
    def n(self):
        return self.H.shape[0]

    def objective(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return float(0.5 * x @ self.H @ x + self.g @ x + self.const)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return self.free + np.einsum("kin,n->ki", self.Su, x)

    def max_violation(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if len(self.d) == 0:
            return 0.0
        return float(max(0.0, np.max(self.C @ x - self.d)))


@dataclass
class MpcSolution:
    x: np.ndarray
    objective: float
    status: str
    iterations: int
    kkt_residual: float
    multipliers: np.ndarray
    active: np.ndarray
    certificate: int = -1
    states: np.ndarray = None
    input_shape: tuple = None

    @property
    def u(self):
        return self.x.reshape(self.input_shape)

    @property
    def optimal(self):
        return self.status == "optimal"


def build_qp(waypoints, s0, models, weights=None, bounds=None, N=5, u_prev=None):
    """Condensed tracking QP over U = (u_0, …, u_{N−1}).

    J = Σ_{k=0..N} (s_k − way_k)ᵀ V (s_k − way_k) + Σ_{k=0..N−1} u_kᵀ W u_k with
    s_{k+1} = A_k s_k + B_k u_k + c_k substituted.  ``waypoints`` holds N+1
    state references (way_0 … way_N) or N references (way_1 … way_N, with
    way_0 = s_0).  ``models`` is one :class:`LtvModel` or a sequence of N.
    Constraints: input box, state box (finite entries only) and rate limits,
    including u_0 − u_prev.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    weights = weights or CostWeights()
    bounds = bounds or InputBounds()
    s0 = np.asarray(s0, dtype=np.float64)
    way = np.asarray(waypoints, dtype=np.float64)
    if way.ndim != 2 or way.shape[1] != STATE_DIM:
        raise ValueError("waypoints must be an (N or N+1, 4) array of state references")
    if len(way) == N:
        way = np.vstack([s0, way])
    elif len(way) > N:
        way = way[:N + 1]
    else:
        raise ValueError(f"need at least N={N} waypoints, got {len(way)}")
    if isinstance(models, LtvModel):
        models = [models] * N
    if len(models) < N:
        raise ValueError("need one model per horizon step")
    u_prev = np.zeros(INPUT_DIM) if u_prev is None else np.asarray(u_prev, dtype=np.float64)
    lo0, hi0 = bounds.first_step_interval(u_prev)
    if np.any(lo0 > hi0):
        raise ValueError("infeasible bounds: rate limits cannot reach the input box from u_prev")

    m = INPUT_DIM
    n = N * m
    free = np.zeros((N + 1, STATE_DIM))
    Su = np.zeros((N + 1, STATE_DIM, n))
    free[0] = s0
    for k in range(N):
        mod = models[k]
        free[k + 1] = mod.A @ free[k] + mod.c
        Su[k + 1] = mod.A @ Su[k]
        Su[k + 1][:, k * m:(k + 1) * m] += mod.B
    V, W = weights.V, weights.W
    H = np.zeros((n, n))
    g = np.zeros(n)
    const = 0.0
    for k in range(N + 1):
        e = free[k] - way[k]
        H += Su[k].T @ V @ Su[k]
        g += Su[k].T @ V @ e
        const += float(e @ V @ e)
    H = 2.0 * (H + np.kron(np.eye(N), W))
    H = 0.5 * (H + H.T)
    g = 2.0 * g

    rows, rhs, labels = [], [], []
    eye = np.eye(n)
    for k in range(N):
        for j in range(m):
            i = k * m + j
            rows += [eye[i], -eye[i]]
            rhs += [bounds.u_max[j], -bounds.u_min[j]]
            labels += [f"u[{k},{j}]<=max", f"u[{k},{j}]>=min"]
            diff = eye[i] - (eye[i - m] if k > 0 else 0.0)
            base = u_prev[j] if k == 0 else 0.0
            rows += [diff, -diff]
            rhs += [bounds.du_max[j] + base, -bounds.du_min[j] - base]
            labels += [f"du[{k},{j}]<=max", f"du[{k},{j}]>=min"]
    for k in range(1, N + 1):
        for i in range(STATE_DIM):
            if np.isfinite(bounds.s_max[i]):
                rows.append(Su[k][i])
                rhs.append(bounds.s_max[i] - free[k][i])
                labels.append(f"s[{k},{i}]<=max")
            if np.isfinite(bounds.s_min[i]):
                rows.append(-Su[k][i])
                rhs.append(free[k][i] - bounds.s_min[i])
                labels.append(f"s[{k},{i}]>=min")
    C = np.array(rows).reshape(-1, n)
    d = np.array(rhs, dtype=np.float64)
    return QpProblem(H=H, g=g, C=C, d=d, const=const, input_shape=(N, m), free=free, Su=Su, way=way,
                     weights=weights, labels=labels)


def direct_objective(problem, U, models):
    """Simulate the LTV models forward and sum the tracking cost term by term."""
    U = np.asarray(U, dtype=np.float64).reshape(problem.input_shape)
    N = U.shape[0]
    if isinstance(models, LtvModel):
        models = [models] * N
    V, W = problem.weights.V, problem.weights.W
    s = problem.free[0].copy()
    J = float((s - problem.way[0]) @ V @ (s - problem.way[0]))
    for k in range(N):
        s = models[k].predict(s, U[k])
        e = s - problem.way[k + 1]
        J += float(e @ V @ e) + float(U[k] @ W @ U[k])
    return J


@kernel
def dual_active_set(H, g, C, d, tol, max_iter):
    """Goldfarb–Idnani dual active-set method for min ½xᵀHx + gᵀx s.t. Cx ≤ d (H ≻ 0).

    Starts from the unconstrained minimizer and repeatedly adds the most
    violated constraint, taking dual (drop) and primal (full) steps so that
    dual feasibility is kept throughout.  Returns
    (x, multipliers (m,), active mask (m,), status, iterations, certificate).
    """
    n = H.shape[0]
    m = C.shape[0]
    Hinv = np.linalg.inv(H)
    x = -Hinv @ g
    act = np.empty(m, dtype=np.int64)
    u = np.zeros(m)
    q = 0
    it = 0
    status = 0
    cert = -1
    lam = np.zeros(m)
    mask = np.zeros(m, dtype=np.bool_)
    if m == 0:
        return x, lam, mask, status, it, cert
    done = False
    while not done:
        s = d - C @ x
        p = -1
        worst = -tol
        for i in range(m):
            if s[i] < worst:
                skip = False
                for j in range(q):
                    if act[j] == i:
                        skip = True
                if not skip:
                    worst = s[i]
                    p = i
        if p < 0:
            break
        up = 0.0
        while True:
            it += 1
            if it > max_iter:
                status = 2
                done = True
                break
            npv = -C[p]
            hn = Hinv @ npv
            if q > 0:
                Nm = np.empty((n, q))
                for j in range(q):
                    Nm[:, j] = -C[act[j]]
                HN = Hinv @ Nm
                M = Nm.T @ HN
                r = np.linalg.solve(M, Nm.T @ hn)
                z = hn - HN @ r
            else:
                r = np.zeros(0)
                z = hn
            t1 = np.inf
            k = -1
            for j in range(q):
                if r[j] > 1e-14:
                    ratio = u[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        k = j
            zn = z @ npv
            if np.max(np.abs(z)) <= 1e-13 * (np.max(np.abs(hn)) + 1e-300) or zn <= 0.0:
                t2 = np.inf
            else:
                t2 = -(d[p] - C[p] @ x) / zn
            if t1 == np.inf and t2 == np.inf:
                status = 1
                cert = p
                done = True
                break
            if t2 == np.inf:
                for j in range(q):
                    u[j] -= t1 * r[j]
                up += t1
                for j in range(k, q - 1):
                    act[j] = act[j + 1]
                    u[j] = u[j + 1]
                q -= 1
                continue
            t = min(t1, t2)
            x = x + t * z
            for j in range(q):
                u[j] -= t * r[j]
            up += t
            if t2 <= t1:
                act[q] = p
                u[q] = up
                q += 1
                break
            for j in range(k, q - 1):
                act[j] = act[j + 1]
                u[j] = u[j + 1]
            q -= 1
    for j in range(q):
        lam[act[j]] = max(u[j], 0.0)
        mask[act[j]] = True
    return x, lam, mask, status, it, cert


def kkt_residual(problem, x, lam):
    """Max of stationarity, primal and dual infeasibility, and complementarity violations."""
    x = np.asarray(x, dtype=np.float64)
    stat = problem.H @ x + problem.g
    if len(problem.d):
        slack = problem.C @ x - problem.d
        stat = stat + problem.C.T @ lam
        prim = max(0.0, float(slack.max()))
        dual = max(0.0, float((-lam).max()))
        comp = float(np.max(np.abs(lam * slack)))
    else:
        prim = dual = comp = 0.0
    return max(float(np.max(np.abs(stat))) if len(stat) else 0.0, prim, dual, comp)


def _polish(problem, x, lam, mask, tol):
    """Re-solve the equality KKT system on the final active set for a crisper optimum."""
    idx = np.flatnonzero(mask)
    n = problem.n
    if len(idx) == 0:
        x_p = np.linalg.solve(problem.H, -problem.g)
        lam_p = np.zeros(len(problem.d))
    else:
        CA = problem.C[idx]
        K = np.zeros((n + len(idx), n + len(idx)))
        K[:n, :n] = problem.H
        K[:n, n:] = CA.T
        K[n:, :n] = CA
        rhs = np.concatenate([-problem.g, problem.d[idx]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            return x, lam
        x_p = sol[:n]
        lam_p = np.zeros(len(problem.d))
        lam_p[idx] = sol[n:]
    if not np.all(np.isfinite(x_p)) or lam_p.min(initial=0.0) < -tol or problem.max_violation(x_p) > tol:
        return x, lam
    lam_p = np.maximum(lam_p, 0.0)
    # active single-variable rows (box bounds) are met exactly, not up to solve roundoff
    for i in idx:
        nz = np.flatnonzero(problem.C[i])
        if len(nz) == 1 and abs(problem.C[i, nz[0]]) == 1.0:
            x_p[nz[0]] = problem.d[i] * problem.C[i, nz[0]]
    if kkt_residual(problem, x_p, lam_p) <= kkt_residual(problem, x, lam):
        return x_p, lam_p
    return x, lam


def solve_qp(problem, tol=1e-6, max_iter=2000):
    """Solve ``problem``; status is optimal, infeasible (with certificate row) or maxiter."""
    H = np.ascontiguousarray(problem.H, dtype=np.float64)
    if np.linalg.eigvalsh(H).min() <= 0:
        raise ValueError("QP Hessian must be positive definite")
    x, lam, mask, status, iters, cert = dual_active_set(
        H, np.ascontiguousarray(problem.g, dtype=np.float64), np.ascontiguousarray(problem.C, dtype=np.float64),
        np.ascontiguousarray(problem.d, dtype=np.float64), tol * 1e-3, max_iter)
    if status == OPTIMAL:
        x, lam = _polish(problem, x, lam, mask, tol)
    res = kkt_residual(problem, x, lam)
    states = problem.predict(x) if problem.Su is not None else None
    return MpcSolution(x=x, objective=problem.objective(x), status=STATUS_NAMES[int(status)], iterations=int(iters),
                       kkt_residual=res, multipliers=lam, active=mask, certificate=int(cert), states=states,
                       input_shape=problem.input_shape)
