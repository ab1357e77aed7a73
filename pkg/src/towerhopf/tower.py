"""Inclusions, conditional expectations of index-finite type, and the
iterated basic construction.

The tower is built concretely: each new floor is realized on the GNS
space of the previous algebra (left regular representation), the Jones
projection is the matrix of the conditional expectation in the
orthonormal coordinates of the floor below, and the trace is extended
by the unique Markov state.  All later structure (Fourier maps,
pairing, Hopf data) is evaluated inside one "frame": the second-floor
ambient, where every lower algebra, both Jones projections, and all
three expectations live side by side.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la
from . import algcore as ac
from ._linalg import dagger
from .algcore import (AlgebraElement, StarAlgebra, TraceExpectation,
                      TraceFunctional, as_matrix)
from .errors import (AlgebraStructureError, DimensionCapError,
                     NotConnectedError, NotDepthTwoError,
                     NotIndexFiniteError, NumericalInconsistencyError)

__all__ = [
    "Expectation", "Inclusion", "Floor", "Frame", "Tower", "Depth2Basis",
    "minimal_expectation", "expectation_for_trace", "quasi_basis",
    "basic_construction", "build_tower", "pushdown", "relative_commutant",
    "depth2_test", "expectation_onto_AprimeAn", "expectation_onto_A1primeAn",
]


# ---------------------------------------------------------------------------
# expectations with quasi-basis data


@dataclass
class Expectation:
    """A conditional expectation together with its quasi-basis.

    map is the underlying TraceExpectation (an orthogonal projection in
    trace coordinates); quasi_mats stacks a quasi-basis {l_i} satisfying
    sum_i l_i E(l_i* a) = a; index_element = sum_i l_i l_i*; scalar_index
    is set when the index element is a scalar multiple of the identity,
    and tau is its reciprocal.
    """

    map: TraceExpectation
    onto: StarAlgebra
    source: StarAlgebra
    quasi_mats: np.ndarray
    index_element: np.ndarray
    scalar_index: float = None
    tau: float = None

    def __call__(self, x):
        return self.map(x)

    @property
    def quasi_basis(self):
        return [AlgebraElement(m, self.source.trace) for m in self.quasi_mats]

    def matrix_on(self, alg):
        return self.map.matrix_on(alg)


def _expectation_matrix(E, alg):
    """Matrix of E on alg's coefficient space, hermitized.

    For a trace-preserving expectation in orthonormal coordinates this
    is an orthogonal projection; a visible failure of self-adjointness
    means E does not preserve the trace that built the coordinates.
    """
    if hasattr(E, "matrix_on"):
        m = E.matrix_on(alg)
    else:
        m = alg.coeffs(np.array([as_matrix(E(b)) for b in alg.basis_mats])).T
    defect = np.linalg.norm(m - dagger(m)) / max(1.0, np.linalg.norm(m))
    if defect > 1e-8:
        raise NumericalInconsistencyError(
            "expectation matrix is not self-adjoint (defect %.3e): the "
            "map does not preserve the ambient trace" % defect)
    return la.herm(m)


def _quasi_basis_mats(E, big, tol=1e-9):
    """Quasi-basis of E on big via the frame operator of the basis.

    In coefficient coordinates the positive operator
    F = sum_i L_i Ehat L_i^* (L_i = left multiplication by basis_i,
    Ehat = matrix of E) sends a to sum_i b_i E(b_i* a).  Its inverse
    square root applied to the basis produces a family whose frame
    operator is the identity, i.e. a quasi-basis.  F singular means E
    admits none.
    """
    L = big.left_mult_matrices()
    ehat = _expectation_matrix(E, big)
    F = la.herm(np.einsum("aij,jk,alk->il", L, ehat, np.conj(L)))
    w = np.linalg.eigvalsh(F)
    if w[0] <= 1e-10 * max(w[-1], 1.0):
        raise NotIndexFiniteError(
            "frame operator singular (eigs %.3e .. %.3e): expectation is "
            "not of index-finite type" % (w[0], w[-1]))
    Fi = la.psd_inv_sqrt(F)
    lam = np.einsum("ki,knm->inm", Fi, big.basis_mats)
    # verify the defining identity on the full basis
    k, n = big.dimension, big.trace.n
    prods = np.einsum("imn,jnp->ijmp", dagger(lam), big.basis_mats)
    emats = E(prods.reshape(k * k, n, n)).reshape(k, k, n, n)
    recon = np.einsum("imn,ijnp->jmp", lam, emats)
    res = float(np.max(np.linalg.norm(
        big.trace.coords(recon - big.basis_mats), axis=1)))
    if res > 1e-7:
        raise NumericalInconsistencyError(
            "quasi-basis identity failed (residual %.3e)" % res)
    index = la.herm(np.einsum("imn,inp->mp", lam, dagger(lam)))
    flipped = la.herm(np.einsum("imn,inp->mp", dagger(lam), lam))
    if np.linalg.norm(index - flipped) > 1e-7 * max(
            1.0, np.linalg.norm(index)):
        raise NumericalInconsistencyError(
            "index element depends on the side of the quasi-basis")
    return lam, index


def quasi_basis(E, small=None, big=None, trace=None, tol=1e-9):
    """Quasi-basis of a conditional expectation, as AlgebraElements."""
    if big is None:
        big = getattr(E, "source", None)
        if big is None:
            raise ValueError("quasi_basis needs the source algebra")
    lam, _ = _quasi_basis_mats(E, big, tol=tol)
    return [AlgebraElement(m, big.trace) for m in lam]


def _finish_expectation(big, small, check=True):
    """Trace-preserving expectation of big onto small, with quasi-basis,
    index element, and scalar index detection."""
    E = ac.trace_expectation(big, small, check=check)
    lam, index = _quasi_basis_mats(E, big)
    tr = big.trace
    s = float(tr(index).real)
    scalar = None
    tau = None
    n = tr.n
    if np.linalg.norm(index - s * np.eye(n)) <= 1e-7 * max(1.0, abs(s)):
        scalar = s
        tau = 1.0 / s
    return Expectation(map=E, onto=small, source=big, quasi_mats=lam,
                       index_element=index, scalar_index=scalar, tau=tau)


# ---------------------------------------------------------------------------
# minimal expectation from the inclusion graph


def minimal_expectation(small, big, trace=None):
    """Minimal conditional expectation of a connected inclusion.

    small, big: StarAlgebras (or matrix stacks) in a common ambient;
    trace is only a provisional inner product used to orthonormalize
    while the block structure is read off (default: normalized matrix
    trace).  The returned Expectation carries the algebras rebuilt
    orthonormal for the Markov trace (attributes small_alg, big_alg,
    markov_trace, inclusion_graph).

    The Markov trace assigns the big algebra's blocks the entries of
    the Perron-Frobenius eigenvector of lam^T lam, which is exactly the
    weight vector whose trace-preserving expectation has a scalar index
    element equal to ||lam||^2; that expectation is the minimal one.
    Disconnected inclusion graphs have no distinguished eigenvector, so
    they are rejected: supply the trace explicitly instead.
    """
    if isinstance(big, StarAlgebra):
        n = big.trace.n
        big_mats = big.basis_mats
    else:
        big_mats = np.asarray(big, dtype=complex)
        n = big_mats.shape[-1]
    small_mats = small.basis_mats if isinstance(small, StarAlgebra) \
        else np.asarray(small, dtype=complex)
    if trace is None:
        trace = TraceFunctional(np.eye(n, dtype=complex) / n,
                                label="provisional[n=%d]" % n)
    big0 = StarAlgebra.from_spanning(trace, big_mats, name="big")
    small0 = StarAlgebra.from_spanning(trace, small_mats, name="small")
    sb = ac.block_structure(small0)
    bb = ac.block_structure(big0)
    lam = ac.inclusion_matrix(small0, big0, sb, bb)
    if not ac.is_connected(lam):
        raise NotConnectedError(
            "inclusion graph %s is disconnected: no unique minimal "
            "expectation; supply block weights explicitly" % lam.tolist())
    lamf = lam.astype(float)
    w, v = np.linalg.eigh(lamf.T @ lamf)
    index = float(w[-1])
    t = v[:, -1]
    if t[np.argmax(np.abs(t))] < 0:
        t = -t
    if np.min(t) <= 1e-12:
        raise NumericalInconsistencyError(
            "Perron-Frobenius eigenvector not strictly positive: %s" % t)
    sizes = np.array([k for (k, _, _) in bb], dtype=float)
    t = t / float(sizes @ t)  # tr(1) = 1
    rho = np.zeros((n, n), dtype=complex)
    psum = np.zeros((n, n), dtype=complex)
    for (k, m, q), tj in zip(bb, t):
        rho += (tj / m) * q
        psum += q
    if np.linalg.norm(psum - np.eye(n)) > 1e-8:
        raise AlgebraStructureError(
            "central projections of the big algebra do not sum to the "
            "ambient identity: non-unital inclusion")
    markov = TraceFunctional(rho, weights={"big_blocks": t.tolist()})
    big1 = StarAlgebra.from_spanning(markov, big_mats, name="big")
    small1 = StarAlgebra.from_spanning(markov, small_mats, name="small")
    E = _finish_expectation(big1, small1)
    if E.scalar_index is None:
        raise NumericalInconsistencyError(
            "minimal expectation produced a non-scalar index element")
    if abs(E.scalar_index - index) > 1e-6 * max(1.0, index):
        raise NumericalInconsistencyError(
            "index %.9f does not match the inclusion-graph norm %.9f"
            % (E.scalar_index, index))
    E.small_alg = small1
    E.big_alg = big1
    E.markov_trace = markov
    E.inclusion_graph = lam
    return E


def expectation_for_trace(small_mats, big_mats, rho, label=None):
    """Trace-preserving expectation for an explicitly given ambient
    density (the route for disconnected inclusions, e.g. group pairs
    with the regular trace)."""
    trace = TraceFunctional(rho, label=label)
    big1 = StarAlgebra.from_spanning(trace, big_mats, name="big")
    small1 = StarAlgebra.from_spanning(trace, small_mats, name="small")
    E = _finish_expectation(big1, small1)
    E.small_alg = small1
    E.big_alg = big1
    E.markov_trace = trace
    E.inclusion_graph = ac.inclusion_matrix(small1, big1)
    return E


@dataclass
class Inclusion:
    """A unital inclusion small ⊆ big with a chosen expectation."""

    small: StarAlgebra
    big: StarAlgebra
    expectation: Expectation
    trace: TraceFunctional
    connected: bool
    inclusion_graph: np.ndarray
    label: str = ""

    @classmethod
    def minimal(cls, small_mats, big_mats, label=""):
        E = minimal_expectation(small_mats, big_mats)
        return cls(small=E.small_alg, big=E.big_alg, expectation=E,
                   trace=E.markov_trace,
                   connected=True, inclusion_graph=E.inclusion_graph,
                   label=label)

    @classmethod
    def with_trace(cls, small_mats, big_mats, rho, label=""):
        E = expectation_for_trace(small_mats, big_mats, rho)
        return cls(small=E.small_alg, big=E.big_alg, expectation=E,
                   trace=E.markov_trace,
                   connected=ac.is_connected(E.inclusion_graph),
                   inclusion_graph=E.inclusion_graph, label=label)

    @property
    def index(self):
        return self.expectation.scalar_index

    @property
    def tau(self):
        return self.expectation.tau


# ---------------------------------------------------------------------------
# basic construction


@dataclass
class Floor:
    """One step of the basic construction.

    The new algebra lives on the GNS space of the previous one, so the
    new ambient dimension equals the previous algebra's dimension.
    lift(x) embeds a previous-ambient element (in the span of
    prev_algebra) into the new ambient as its left regular matrix.
    """

    level: int
    prev_algebra: StarAlgebra
    jones: np.ndarray
    raw_trace: object                 # callable on new-ambient matrices
    lite: bool = False
    trace: TraceFunctional = None
    algebra: StarAlgebra = None
    sub: StarAlgebra = None           # lifted previous algebra
    expectation: Expectation = None   # onto sub, with quasi-basis

    def lift(self, x):
        return self.prev_algebra.lift_left(x)


def _raw_trace_fn(prev, quasi_mats, tau):
    """The Markov extension of the trace to the new floor: a sum of
    vector states along the GNS vectors of a quasi-basis."""
    xi = prev.coeffs(quasi_mats)              # (m, K)

    def raw_trace(z):
        z = np.asarray(z, dtype=complex)
        if z.ndim == 3:
            return tau * np.einsum("ik,zkl,il->z", np.conj(xi), z, xi)
        return tau * complex(np.einsum("ik,kl,il->", np.conj(xi), z, xi))

    return raw_trace


def _extension_span_exact(L, e):
    K = L.shape[0]
    cand = np.einsum("aij,jk,bkl->abil", L, e, L).reshape(K * K, K, K)
    return la.mgs(cand.reshape(K * K, K * K))


def _extension_span_sampled(L, e, max_dim, rng):
    """Seeded random sampling of the span L e L; rank saturates fast
    because products of generic combinations already span it."""
    K = L.shape[0]
    seeds = [np.eye(K, dtype=complex), e]
    seeds.extend(L)
    seeds.extend(L @ e)
    seeds.extend(e @ L)
    rows = la.mgs(np.array(seeds).reshape(len(seeds), K * K))
    stable = 0
    while stable < 2:
        m = 96
        cl = rng.standard_normal((m, K)) + 1j * rng.standard_normal((m, K))
        cr = rng.standard_normal((m, K)) + 1j * rng.standard_normal((m, K))
        X = np.tensordot(cl, L, axes=(1, 0))
        Y = np.tensordot(cr, L, axes=(1, 0))
        cand = np.einsum("aij,jk,akl->ail", X, e, Y).reshape(m, K * K)
        new_rows = la.mgs(np.vstack([rows, cand]))
        if new_rows.shape[0] > max_dim:
            raise DimensionCapError(
                "extension span exceeded the dimension cap %d" % max_dim)
        stable = stable + 1 if new_rows.shape[0] == rows.shape[0] else 0
        rows = new_rows
    return rows


def basic_construction(big, small, expectation, *, level=1, max_dim=None,
                       rng=None, lite=False, check_commutant=True,
                       full_expectation=True, tol=1e-9):
    """One basic-construction step over the inclusion small ⊆ big.

    Realizes big on its own GNS space by left multiplication; the Jones
    projection is the matrix of the expectation in big's orthonormal
    coordinates; the new algebra is the span of (lifted big) e (lifted
    big); the new trace is the Markov extension; the new expectation is
    the trace-preserving one onto the lifted copy of big.

    With lite=True only the Jones projection, the lift, and the raw
    Markov trace are produced (enough for unit-decomposition solves on
    a floor whose full algebra would be too large).

    check_commutant additionally computes the commutant of the right
    action of small on the GNS space and asserts it coincides with the
    constructed algebra; this is quadratic in the ambient and is meant
    for the lower floors.  full_expectation=False skips the quasi-basis
    of the new expectation (its frame operator scales with the cube of
    the new dimension; nothing downstream needs it on the top floor).
    """
    if expectation.tau is None:
        raise AlgebraStructureError(
            "basic construction needs a scalar index element (no Markov "
            "trace extension otherwise); got a non-scalar index")
    tau = expectation.tau
    rng = rng or np.random.default_rng(2077)
    K = big.dimension
    L = big.left_mult_matrices()
    e = _expectation_matrix(expectation, big)
    if np.linalg.norm(e @ e - e) > 1e-8:
        raise NumericalInconsistencyError("Jones projection not idempotent")
    raw_trace = _raw_trace_fn(big, expectation.quasi_mats, tau)
    floor = Floor(level=level, prev_algebra=big, jones=e,
                  raw_trace=raw_trace, lite=lite)
    if lite:
        return floor

    if max_dim is None:
        max_dim = K * K
    if K <= 24:
        rows = _extension_span_exact(L, e)
        if rows.shape[0] > max_dim:
            raise DimensionCapError(
                "extension dimension %d exceeds the cap %d"
                % (rows.shape[0], max_dim))
    else:
        rows = _extension_span_sampled(L, e, max_dim, rng)
    onb = rows.reshape(-1, K, K)

    # Markov trace on the new floor, re-extended to a faithful ambient
    # state: in a Hilbert-Schmidt orthonormal basis of the span, the
    # density sum_k tr(c_k) c_k* represents tr composed with the
    # HS-projection onto the span, which is faithful on all of M_K.
    trv = raw_trace(onb)
    if np.max(np.abs(trv.imag)) > 1e-8:
        raise NumericalInconsistencyError("Markov trace not real on a "
                                          "Hermitian-closed span")
    rho = la.herm(np.einsum("z,zij->ji", trv, np.conj(onb)))
    s = float(np.trace(rho).real)
    if abs(s - 1.0) > 1e-7:
        raise NumericalInconsistencyError(
            "Markov extension is not a state (total mass %.9f)" % s)
    rho = rho / s
    new_trace = TraceFunctional(rho, label="L2(level%d)" % (level - 1))

    alg = StarAlgebra(new_trace,
                      new_trace.from_coords(la.mgs(new_trace.coords(onb))),
                      name="level%d" % level)
    # the lift is a trace isometry, so the lifted basis is already
    # orthonormal for the new trace; build the subalgebra directly
    sub = StarAlgebra(new_trace, L, name="level%d" % (level - 1))
    if not alg.contains(e, tol=1e-7):
        raise NumericalInconsistencyError(
            "Jones projection escaped the constructed span")
    if not alg.contains_all(L, tol=1e-7):
        raise NumericalInconsistencyError(
            "lifted algebra escaped the constructed span")

    # tr_new(lift(x)) = tr(x): the extension restricts correctly
    tdef = np.max(np.abs(new_trace(L) - big.trace(big.basis_mats)))
    if tdef > 1e-8:
        raise NumericalInconsistencyError(
            "Markov extension does not restrict to the old trace "
            "(defect %.3e)" % tdef)

    if full_expectation:
        E_new = _finish_expectation(alg, sub)
        if E_new.scalar_index is None or \
                abs(E_new.scalar_index - 1.0 / tau) > 1e-6 / tau:
            raise NumericalInconsistencyError(
                "dual expectation index does not reproduce the "
                "inclusion index")
    else:
        E_new = Expectation(map=ac.trace_expectation(alg, sub), onto=sub,
                            source=alg, quasi_mats=None, index_element=None,
                            scalar_index=1.0 / tau, tau=tau)
    # the dual expectation sends the Jones projection to tau
    if np.linalg.norm(as_matrix(E_new(e)) - tau * np.eye(K)) > 1e-7:
        raise NumericalInconsistencyError(
            "E(jones) != tau: Markov property failed on this floor")
    # e implements the old expectation: e lift(a) e = lift(E(a)) e
    lifted_E = np.array([big.lift_left(x)
                         for x in expectation(big.basis_mats)])
    resid = np.einsum("ij,ajk,kl->ail", e, L, e) - lifted_E @ e
    if np.max(np.linalg.norm(resid, axis=(1, 2))) > 1e-7:
        raise NumericalInconsistencyError(
            "Jones projection does not implement the expectation")
    # e commutes with the lifted small algebra
    ls = np.array([big.lift_left(x) for x in small.basis_mats])
    cres = np.max(np.linalg.norm(ls @ e - e @ ls, axis=(1, 2)))
    if cres > 1e-8:
        raise NumericalInconsistencyError(
            "Jones projection does not commute with the small algebra")

    if check_commutant:
        # independent construction: the new floor must equal the
        # commutant of the right action of small on the GNS space
        ramb = ac.full_matrix_algebra(new_trace)
        rmats = np.array([big.coeffs(
            np.einsum("aij,jk->aik", big.basis_mats, s)).T
            for s in small.basis_mats])
        comm = ac.commutant(rmats, ramb, name="right-commutant")
        if comm.dimension != alg.dimension or \
                not alg.contains_all(comm.basis_mats, tol=1e-7):
            raise NumericalInconsistencyError(
                "span of (big e big) differs from the right-action "
                "commutant: %d vs %d" % (alg.dimension, comm.dimension))

    floor.trace = new_trace
    floor.algebra = alg
    floor.sub = sub
    floor.expectation = E_new
    return floor


# ---------------------------------------------------------------------------
# the tower and its working frame


@dataclass
class Frame:
    """All tower data embedded in the second-floor ambient.

    Everything the Fourier/pairing/Hopf layers need lives here as
    matrices of one size: the four algebras, both Jones projections,
    the three expectations, and the quasi-basis of the bottom
    expectation.
    """

    trace: TraceFunctional
    small: StarAlgebra          # bottom algebra
    base: StarAlgebra           # middle algebra (the one acted upon)
    mid: StarAlgebra            # first extension
    top: StarAlgebra            # second extension
    e1: np.ndarray
    e2: np.ndarray
    E0: TraceExpectation
    E1: TraceExpectation
    E2: TraceExpectation
    tau: float
    quasi: np.ndarray           # bottom quasi-basis, embedded
    quasi_pairs: np.ndarray = None   # cached l_i e1 l_j stack

    def pair_stack(self):
        if self.quasi_pairs is None:
            self.quasi_pairs = np.einsum(
                "aij,jk,bkl->abil", self.quasi, self.e1, self.quasi)
        return self.quasi_pairs


class Tower:
    """The chain of algebras from the bottom inclusion to the third
    extension, with Jones projections, dual expectations, and the
    consistent Markov trace."""

    def __init__(self, inclusion, floors, frame, max_dim, rng_seed):
        self.inclusion = inclusion
        self.floors = floors          # dict level -> Floor
        self.frame = frame
        self.tau = inclusion.tau
        self.scalar_index = inclusion.index
        self.max_dim = max_dim
        self.rng_seed = rng_seed
        self._commutants = {}
        self.levels = {
            -1: inclusion.small,
            0: inclusion.big,
            1: floors[1].algebra,
            2: floors[2].algebra,
            3: floors[3].algebra if floors.get(3) is not None else None,
        }

    def jones(self, n):
        return self.floors[n].jones

    def expectation(self, n):
        if n == 0:
            return self.inclusion.expectation
        return self.floors[n].expectation

    def embed(self, x, frm, to):
        """Carry an element from the ambient of level frm to that of
        level to (levels -1 and 0 share an ambient)."""
        cur = as_matrix(x)
        for lvl in range(max(frm, 0) + 1, max(to, 0) + 1):
            cur = self.floors[lvl].lift(cur)
        return cur

    def frame_algebra(self, level):
        return {-1: self.frame.small, 0: self.frame.base,
                1: self.frame.mid, 2: self.frame.top}[level]

    def relative_commutant(self, lower, upper):
        """Commutant of level `lower` inside level `upper`, computed in
        the frame for upper <= 2 and on the third floor otherwise."""
        key = (lower, upper)
        if key in self._commutants:
            return self._commutants[key]
        if upper <= 2:
            within = self.frame_algebra(upper)
            gens = self.frame_algebra(lower)
        elif self.floors.get(3) is not None and not self.floors[3].lite:
            within = self.floors[3].algebra
            gens = np.array([self.embed(b, lower, 3)
                             for b in self.levels[lower].basis_mats])
        else:
            raise DimensionCapError(
                "third floor not materialized: commutants into it are "
                "unavailable under the current dimension cap")
        out = ac.commutant(gens, within,
                           name="rc(%d,%d)" % (lower, upper))
        self._commutants[key] = out
        return out


def _build_frame(incl, f1, f2):
    tr2 = f2.trace
    lift12 = f2.prev_algebra.lift_left

    def to2(x):
        return lift12(f1.prev_algebra.lift_left(x))

    small2 = StarAlgebra(tr2, np.array([to2(b)
                                        for b in incl.small.basis_mats]),
                         name="frame-small")
    base2 = StarAlgebra(tr2, np.array([to2(b) for b in incl.big.basis_mats]),
                        name="frame-base")
    e1f = lift12(f1.jones)
    quasi2 = np.array([to2(q) for q in incl.expectation.quasi_mats])
    E0f = ac.trace_expectation(f2.algebra, small2)
    E1f = ac.trace_expectation(f2.algebra, base2)
    E2f = f2.expectation.map
    frame = Frame(trace=tr2, small=small2, base=base2, mid=f2.sub,
                  top=f2.algebra, e1=e1f, e2=f2.jones, E0=E0f, E1=E1f,
                  E2=E2f, tau=incl.tau, quasi=quasi2)
    # embedding consistency: expectations computed upstairs restrict to
    # the ones computed downstairs
    res = max(
        float(np.max(np.linalg.norm(
            E1f(np.array([lift12(b) for b in f1.algebra.basis_mats]))
            - np.array([lift12(as_matrix(f1.expectation(b)))
                        for b in f1.algebra.basis_mats]), axis=(1, 2)))),
        float(np.max(np.linalg.norm(
            E0f(base2.basis_mats)
            - np.array([to2(as_matrix(incl.expectation(b)))
                        for b in incl.big.basis_mats]), axis=(1, 2)))),
    )
    if res > 1e-7:
        raise NumericalInconsistencyError(
            "expectations are inconsistent across floors (defect %.3e)"
            % res)
    return frame


def build_tower(incl, depth=3, max_dim=256, rng_seed=7):
    """Iterate the basic construction to the third extension.

    The third floor degrades to a lite floor (Jones projection, lift,
    raw Markov trace, but no orthonormal basis) when its dimension
    would exceed max_dim.
    """
    if incl.tau is None:
        raise AlgebraStructureError(
            "tower needs a scalar-index inclusion")
    rng = np.random.default_rng(rng_seed)
    floors = {}
    f1 = basic_construction(incl.big, incl.small, incl.expectation,
                            level=1, max_dim=max_dim, rng=rng)
    floors[1] = f1
    f2 = basic_construction(f1.algebra, f1.sub, f1.expectation,
                            level=2, max_dim=max_dim, rng=rng)
    floors[2] = f2
    if depth >= 3:
        k2 = f2.algebra.dimension
        k1 = f1.algebra.dimension
        predicted = k2 * k2 // k1
        lite = predicted > max_dim
        f3 = basic_construction(f2.algebra, f2.sub, f2.expectation,
                                level=3, max_dim=max_dim, rng=rng,
                                lite=lite,
                                check_commutant=(k2 <= 24))
        floors[3] = f3
    frame = _build_frame(incl, f1, f2)
    return Tower(incl, floors, frame, max_dim, rng_seed)


# ---------------------------------------------------------------------------
# tower-level operations


def pushdown(x1, tower):
    """Solve x1 e1 = x0 e1 for x0 one level down: x0 = tau^{-1} E1(x1 e1).

    Works in the frame; x1 must lie in the first extension.
    """
    fr = tower.frame
    x1 = as_matrix(x1)
    if fr.mid.defect(x1) > 1e-7:
        raise AlgebraStructureError("pushdown input not in the first "
                                    "extension")
    x0 = as_matrix(fr.E1(x1 @ fr.e1)) / fr.tau
    if np.linalg.norm(x1 @ fr.e1 - x0 @ fr.e1) > 1e-7 * max(
            1.0, np.linalg.norm(x1)):
        raise NumericalInconsistencyError("pushdown identity failed")
    return x0


def relative_commutant(tower, lower, upper):
    return tower.relative_commutant(lower, upper)


@dataclass
class Depth2Basis:
    """Unit decompositions over the Jones projections.

    mu pairs satisfy sum_j mu_j e3 mu'_j = 1 with mu in the second
    relative commutant of the base; gamma pairs do the same one floor
    down: sum_j gamma_j e2 gamma'_j = 1 with gamma in the first relative
    commutant of the bottom algebra.  Both stacks live in the frame.
    """

    gammas: np.ndarray
    gammas_p: np.ndarray
    mus: np.ndarray = None
    mus_p: np.ndarray = None
    residuals: dict = field(default_factory=dict)


def _solve_unit_pairs(basis, sandwich, tol=1e-7):
    """Minimum-norm solve of sum_ab c_ab x_a S x_b = 1, then an SVD
    split of the coefficient matrix into rank-one pairs.

    Returns (left_coeffs, right_coeffs, residual): the pair elements
    are left_coeffs @ basis and right_coeffs @ basis, so the same
    coefficients transport the pairs to any faithful copy of the basis.
    """
    p, n = basis.shape[0], basis.shape[1]
    cols = np.einsum("aij,jk,bkl->abil", basis, sandwich, basis)
    M = cols.reshape(p * p, -1).T
    rhs = np.eye(n, dtype=complex).reshape(-1)
    c, res = la.solve_min_norm(M, rhs)
    if res > tol:
        return None, None, res
    u, s, vh = np.linalg.svd(c.reshape(p, p))
    rank = int(np.sum(s > 1e-11 * max(s[0], 1.0)))
    root = np.sqrt(s[:rank])
    left = root[:, None] * u[:, :rank].T
    right = root[:, None] * np.conj(vh[:rank, :])
    return left, right, res


def depth2_test(tower, solve_mu=True, tol=1e-7):
    """Span comparison (first commutant) e2 (first commutant) against
    the second commutant, plus the unit decompositions when it holds.

    Returns (certified, Depth2Basis or None).
    """
    fr = tower.frame
    P = tower.relative_commutant(-1, 1)
    C = tower.relative_commutant(-1, 2)
    p = P.dimension
    cand = np.einsum("aij,jk,bkl->abil", P.basis_mats, fr.e2,
                     P.basis_mats).reshape(p * p, fr.trace.n, fr.trace.n)
    rows = la.mgs(fr.trace.coords(cand))
    span_dim = rows.shape[0]
    # the candidates always sit inside the second commutant
    inward = float(np.max([C.defect(m) for m in
                           fr.trace.from_coords(rows)]))
    if inward > 1e-7:
        raise NumericalInconsistencyError(
            "sandwich span left the second relative commutant "
            "(defect %.3e)" % inward)
    certified = span_dim == C.dimension
    if not certified:
        return False, None

    residuals = {"span_gap": inward}
    cl, cr, gres = _solve_unit_pairs(P.basis_mats, fr.e2, tol)
    if cl is None:
        raise NumericalInconsistencyError(
            "unit not reached by the certified sandwich span "
            "(residual %.3e)" % gres)
    residuals["gamma_unit"] = gres
    gl = np.tensordot(cl, P.basis_mats, axes=(1, 0))
    gr = np.tensordot(cr, P.basis_mats, axes=(1, 0))
    recon = np.einsum("rij,jk,rkl->il", gl, fr.e2, gr)
    residuals["gamma_recon"] = float(
        np.linalg.norm(recon - np.eye(fr.trace.n)))
    # decomposition of the first extension through the bottom-floor
    # expectation, both bare and starred
    mid = fr.mid.basis_mats
    e1mats = fr.E1(np.einsum("rij,ajk->raik", gr, mid).reshape(
        -1, fr.trace.n, fr.trace.n)).reshape(gr.shape[0], mid.shape[0],
                                             fr.trace.n, fr.trace.n)
    lhs = np.einsum("rij,rajk->aik", gl, e1mats)
    residuals["gamma_expand"] = float(np.max(np.linalg.norm(
        lhs - mid, axis=(1, 2))))
    star = fr.E1(np.einsum("aij,rjk->raik", mid, dagger(gr)).reshape(
        -1, fr.trace.n, fr.trace.n)).reshape(gr.shape[0], mid.shape[0],
                                             fr.trace.n, fr.trace.n)
    lhs2 = np.einsum("raij,rjk->aik", star, dagger(gl))
    residuals["gamma_expand_star"] = float(np.max(np.linalg.norm(
        lhs2 - mid, axis=(1, 2))))
    for key in ("gamma_recon", "gamma_expand", "gamma_expand_star"):
        if residuals[key] > 1e-6:
            raise NumericalInconsistencyError(
                "unit decomposition inconsistent: %s = %.3e"
                % (key, residuals[key]))

    basis = Depth2Basis(gammas=gl, gammas_p=gr, residuals=residuals)
    if solve_mu:
        f3 = tower.floors.get(3)
        if f3 is None:
            raise NotDepthTwoError("third floor missing: rebuild the tower "
                                   "with depth >= 3 for the mu pairs")
        Q = tower.relative_commutant(0, 2)
        q3 = np.array([f3.lift(q) for q in Q.basis_mats])
        ml, mr, mres = _solve_unit_pairs(q3, f3.jones, tol)
        if ml is None:
            raise NumericalInconsistencyError(
                "second-floor unit decomposition failed (residual %.3e) "
                "despite a certified span test" % mres)
        residuals["mu_unit"] = mres
        # the same coefficients express the pairs in the frame
        mus = np.tensordot(ml, Q.basis_mats, axes=(1, 0))
        mus_p = np.tensordot(mr, Q.basis_mats, axes=(1, 0))
        # the decomposition of the top floor through its expectation:
        # w = sum_j mu_j E2(mu'_j w) = sum_j E2(w mu'_j*) mu_j*
        top = fr.top.basis_mats
        n = fr.trace.n
        e2m = fr.E2(np.einsum("rij,ajk->raik", mus_p, top).reshape(
            -1, n, n)).reshape(mus_p.shape[0], top.shape[0], n, n)
        lhs = np.einsum("rij,rajk->aik", mus, e2m)
        residuals["mu_expand"] = float(np.max(np.linalg.norm(
            lhs - top, axis=(1, 2))))
        st = fr.E2(np.einsum("aij,rjk->raik", top, dagger(mus_p)).reshape(
            -1, n, n)).reshape(mus_p.shape[0], top.shape[0], n, n)
        lhs2 = np.einsum("raij,rjk->aik", st, dagger(mus))
        residuals["mu_expand_star"] = float(np.max(np.linalg.norm(
            lhs2 - top, axis=(1, 2))))
        for key in ("mu_expand", "mu_expand_star"):
            if residuals[key] > 1e-6:
                raise NumericalInconsistencyError(
                    "unit decomposition inconsistent: %s = %.3e"
                    % (key, residuals[key]))
        basis.mus = mus
        basis.mus_p = mus_p
    return True, basis


def expectation_onto_AprimeAn(x, tower, n):
    """Compression of a bottom-commutant element onto the commutant of
    the middle algebra: tau * sum_i l_i x l_i* over the bottom
    quasi-basis.  Valid on the first and second extension floors."""
    fr = tower.frame
    x = as_matrix(x)
    if n not in (1, 2):
        raise ValueError("floor index must be 1 or 2")
    target = tower.frame_algebra(n)
    comm_b = tower.relative_commutant(-1, n)
    if comm_b.defect(x) > 1e-7:
        raise AlgebraStructureError(
            "input is not in the bottom relative commutant of floor %d" % n)
    return fr.tau * np.einsum("aij,jk,akl->il", fr.quasi, x,
                              dagger(fr.quasi))


def expectation_onto_A1primeAn(x, tower, n=2):
    """Compression of a bottom-commutant element of the second extension
    onto the commutant of the first extension:
    tau * sum_{i,j} l_i e1 l_j x l_j* e1 l_i*."""
    fr = tower.frame
    x = as_matrix(x)
    if n != 2:
        raise ValueError("only the second extension floor is supported")
    comm_b = tower.relative_commutant(-1, 2)
    if comm_b.defect(x) > 1e-7:
        raise AlgebraStructureError(
            "input is not in the bottom relative commutant of floor 2")
    pairs = fr.pair_stack().reshape(-1, fr.trace.n, fr.trace.n)
    return fr.tau * np.einsum("pij,jk,pkl->il", pairs, x, dagger(pairs))
