"""Finite-dimensional *-algebra kernel.

Every algebra in this package is a unital *-subalgebra of one ambient
matrix algebra, represented by a basis that is orthonormal for the
inner product <a, b> = tr(a* b) of a fixed faithful tracial state tr.
Keeping the basis orthonormal makes conditional expectations orthogonal
projections and turns all the higher structure (Fourier maps, pairings,
Hopf data) into plain tensor contractions.

The heavy lifting is batched numpy: stacks of matrices have shape
(k, n, n) and coordinate vectors live in C^(n^2).
"""

import numpy as np

from . import _linalg as la
from ._linalg import DEFAULT_TOL, dagger
from .errors import (AlgebraStructureError, DimensionCapError,
                     NumericalInconsistencyError)

__all__ = [
    "TraceFunctional", "AlgebraElement", "StarAlgebra",
    "span_closure", "commutant", "intersect", "trace_expectation",
    "TraceExpectation", "positive_functions", "center",
    "central_projections", "block_structure", "inclusion_matrix",
    "is_connected", "full_matrix_algebra", "random_element",
]


def as_matrix(x):
    """Unwrap an AlgebraElement (or pass a plain ndarray through)."""
    if isinstance(x, AlgebraElement):
        return x.entries
    return np.asarray(x, dtype=complex)


def _as_stack(xs):
    if isinstance(xs, np.ndarray) and xs.ndim == 3:
        return np.ascontiguousarray(xs.astype(complex))
    return np.array([as_matrix(x) for x in xs], dtype=complex)


class TraceFunctional:
    """A faithful state tr(x) = Tr(rho x) on an ambient matrix algebra.

    rho is positive definite with Tr(rho) = 1.  The functional is a
    trace on every algebra this package constructs (the density is
    central for the algebra in question); traciality is checked where
    it matters, not assumed here.

    The object also owns the coordinate isometry of its inner product
    <a, b> = tr(a* b): coords(a) = vec(a rho^{1/2}) identifies ambient
    matrices with C^(n^2) so that plain dot products compute <.,.>.
    """

    _counter = [0]

    def __init__(self, rho, label=None, weights=None):
        rho = np.asarray(rho, dtype=complex)
        self.n = rho.shape[0]
        if rho.shape != (self.n, self.n):
            raise AlgebraStructureError("density matrix must be square")
        tr = np.trace(rho)
        if abs(tr - 1.0) > 1e-8:
            raise AlgebraStructureError(
                "density matrix must have unit trace, got %s" % tr)
        self.rho = la.herm(rho)
        # faithfulness <=> positive definiteness
        eigs = np.linalg.eigvalsh(self.rho)
        if eigs[0] <= 1e-13:
            raise AlgebraStructureError(
                "density matrix is singular (min eig %.3e): trace not "
                "faithful" % eigs[0])
        self.rho_half = la.psd_sqrt(self.rho)
        self.rho_inv_half = la.psd_inv_sqrt(self.rho)
        self.weights = weights  # optional block-weight provenance
        if label is None:
            TraceFunctional._counter[0] += 1
            label = "ambient%d[n=%d]" % (TraceFunctional._counter[0], self.n)
        self.label = label

    # -- functional ----------------------------------------------------
    def __call__(self, x):
        x = as_matrix(x)
        if x.ndim == 3:
            return np.einsum("ij,kji->k", self.rho, x)
        return np.trace(self.rho @ x)

    def inner(self, a, b):
        return self(dagger(as_matrix(a)) @ as_matrix(b))

    def norm(self, a):
        return float(np.sqrt(max(self.inner(a, a).real, 0.0)))

    # -- coordinates ---------------------------------------------------
    def coords(self, x):
        """Isometric coordinates: <a,b> equals vdot(coords(a), coords(b))."""
        x = as_matrix(x)
        if x.ndim == 3:
            return (x @ self.rho_half).reshape(x.shape[0], -1)
        return (x @ self.rho_half).reshape(-1)

    def from_coords(self, v):
        v = np.asarray(v, dtype=complex)
        if v.ndim == 2:
            return v.reshape(v.shape[0], self.n, self.n) @ self.rho_inv_half
        return v.reshape(self.n, self.n) @ self.rho_inv_half

    def gram(self, mats):
        c = self.coords(_as_stack(mats))
        return np.conj(c) @ c.T

    def traciality_defect(self, mats):
        """max |tr(ab) - tr(ba)| over pairs from mats."""
        m = _as_stack(mats)
        prods = np.einsum("aij,bjk->abik", m, m)
        t = np.einsum("ij,abji->ab", self.rho, prods)
        return float(np.max(np.abs(t - t.T)))

    def __repr__(self):
        return "TraceFunctional(%s)" % self.label


class AlgebraElement:
    """A matrix tagged with the ambient trace context it lives in.

    Thin wrapper: arithmetic stays closed in the ambient, mixing
    ambients raises.  Internals of this package work on raw ndarrays;
    this class is the typed currency of the public API.
    """

    __slots__ = ("entries", "ambient")

    def __init__(self, entries, ambient):
        self.entries = np.asarray(entries, dtype=complex)
        self.ambient = ambient
        if self.entries.shape != (ambient.n, ambient.n):
            raise AlgebraStructureError(
                "element shape %s does not match ambient dimension %d"
                % (self.entries.shape, ambient.n))

    @property
    def ambient_id(self):
        return self.ambient.label

    def _check(self, other):
        if isinstance(other, AlgebraElement):
            if other.ambient is not self.ambient:
                raise AlgebraStructureError(
                    "elements live in different ambients: %s vs %s"
                    % (self.ambient_id, other.ambient_id))
            return other.entries
        return np.asarray(other, dtype=complex)

    def __add__(self, other):
        return AlgebraElement(self.entries + self._check(other), self.ambient)

    def __sub__(self, other):
        return AlgebraElement(self.entries - self._check(other), self.ambient)

    def __mul__(self, other):
        if np.isscalar(other):
            return AlgebraElement(other * self.entries, self.ambient)
        return AlgebraElement(self.entries @ self._check(other), self.ambient)

    def __rmul__(self, scalar):
        return AlgebraElement(scalar * self.entries, self.ambient)

    def __matmul__(self, other):
        return AlgebraElement(self.entries @ self._check(other), self.ambient)

    def __neg__(self):
        return AlgebraElement(-self.entries, self.ambient)

    def star(self):
        return AlgebraElement(dagger(self.entries), self.ambient)

    @property
    def H(self):
        return self.star()

    def norm(self):
        return self.ambient.norm(self.entries)

    def __repr__(self):
        return "AlgebraElement(%s, %s)" % (self.entries.shape, self.ambient_id)


class StarAlgebra:
    """A unital *-subalgebra presented by a trace-orthonormal basis.

    basis_mats has shape (dim, n, n).  The constructor verifies (or can
    be told to trust) orthonormality, closure under products and *, and
    that the ambient identity lies in the span: all inclusions in this
    package share the ambient unit.
    """

    def __init__(self, trace, basis_mats, name="", check=True,
                 tol=DEFAULT_TOL, rng=None):
        self.trace = trace
        self.basis_mats = _as_stack(basis_mats)
        self.dimension = self.basis_mats.shape[0]
        self.name = name
        self._coord_rows = trace.coords(self.basis_mats)  # (dim, n^2)
        self._mult = None
        self._star = None
        self._left = None
        if check:
            self._validate(tol, rng)

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_spanning(cls, trace, mats, name="", check=True, tol=DEFAULT_TOL):
        """Orthonormalize a spanning family (MGS, deterministic order)."""
        rows = trace.coords(_as_stack(mats))
        basis = la.mgs(rows)
        if basis.shape[0] == 0:
            raise AlgebraStructureError("empty spanning family")
        return cls(trace, trace.from_coords(basis), name=name, check=check,
                   tol=tol)

    def _validate(self, tol, rng):
        g = np.conj(self._coord_rows) @ self._coord_rows.T
        gdef = np.max(np.abs(g - np.eye(self.dimension)))
        if gdef > 1e-7:
            raise AlgebraStructureError(
                "%s: basis not orthonormal (Gram defect %.3e)"
                % (self.name or "algebra", gdef))
        if not self.contains(np.eye(self.trace.n), tol=1e-7):
            raise AlgebraStructureError(
                "%s: ambient identity not in span" % (self.name or "algebra"))
        res = self.closure_defect(rng=rng)
        if res > 1e-7:
            raise AlgebraStructureError(
                "%s: span not closed under products/* (defect %.3e)"
                % (self.name or "algebra", res))

    # -- membership and coordinates --------------------------------------
    @property
    def basis(self):
        return [AlgebraElement(b, self.trace) for b in self.basis_mats]

    @property
    def unit(self):
        return AlgebraElement(np.eye(self.trace.n, dtype=complex), self.trace)

    def coeffs(self, x):
        """Coefficients of x against the orthonormal basis (batched)."""
        x = as_matrix(x)
        if x.ndim == 3:
            return self.trace.coords(x) @ np.conj(self._coord_rows).T
        return np.conj(self._coord_rows) @ self.trace.coords(x)

    def element(self, c):
        c = np.asarray(c, dtype=complex)
        if c.ndim == 2:
            return np.tensordot(c, self.basis_mats, axes=(1, 0))
        return np.tensordot(c, self.basis_mats, axes=(0, 0))

    def project(self, x):
        return self.element(self.coeffs(x))

    def defect(self, x):
        """Distance (trace norm) from x to the span, relative to ||x||."""
        x = as_matrix(x)
        d = self.trace.norm(x - self.project(x))
        return d / max(1.0, self.trace.norm(x))

    def contains(self, x, tol=1e-8):
        return self.defect(x) <= tol

    def contains_all(self, mats, tol=1e-8):
        m = _as_stack(mats)
        return all(self.defect(mi) <= tol for mi in m)

    def closure_defect(self, rng=None, pair_budget=512):
        """Max projection defect of basis products and stars.

        All pairs when affordable, otherwise a seeded sample.
        """
        k, n = self.dimension, self.trace.n
        defects = [self.defect(dagger(b)) for b in self.basis_mats]
        if k * k * n * n <= 2_000_000:
            prods = np.einsum("aij,bjk->abik", self.basis_mats,
                              self.basis_mats).reshape(k * k, n, n)
            c = self.coeffs(prods)
            recon = self.element(c)
            num = np.linalg.norm(
                self.trace.coords(prods - recon), axis=1)
            den = np.maximum(1.0, np.linalg.norm(
                self.trace.coords(prods), axis=1))
            defects.append(float(np.max(num / den)))
        else:
            rng = rng or np.random.default_rng(20260820)
            idx = rng.integers(0, k, size=(pair_budget, 2))
            prods = np.einsum("aij,ajk->aik", self.basis_mats[idx[:, 0]],
                              self.basis_mats[idx[:, 1]])
            c = self.coeffs(prods)
            recon = self.element(c)
            num = np.linalg.norm(self.trace.coords(prods - recon), axis=1)
            den = np.maximum(1.0, np.linalg.norm(
                self.trace.coords(prods), axis=1))
            defects.append(float(np.max(num / den)))
        return max(defects)

    # -- cached structure tensors ----------------------------------------
    def multiplication_tensor(self):
        """m[i, j, k]: coefficient of basis_k in basis_i @ basis_j.

        Computed in row chunks so the (dim^2, n, n) product stack never
        materializes at once on large algebras.
        """
        if self._mult is None:
            k = self.dimension
            out = np.empty((k, k, k), dtype=complex)
            chunk = max(1, 4_000_000 // max(1, k * self.trace.n ** 2))
            for lo in range(0, k, chunk):
                hi = min(k, lo + chunk)
                prods = np.einsum("aij,bjk->abik", self.basis_mats[lo:hi],
                                  self.basis_mats)
                out[lo:hi] = self.coeffs(
                    prods.reshape(-1, self.trace.n, self.trace.n)
                ).reshape(hi - lo, k, k)
            self._mult = out
        return self._mult

    def star_matrix(self):
        """st[i, j]: coefficient of basis_j in (basis_i)*."""
        if self._star is None:
            self._star = self.coeffs(dagger(self.basis_mats))
        return self._star

    def left_mult_matrices(self):
        """L[i] = matrix of left multiplication by basis_i on coefficient
        space; this is the left regular representation of the algebra."""
        if self._left is None:
            m = self.multiplication_tensor()
            # (b_i b_j) = sum_k m[i,j,k] b_k, so L[i][k, j] = m[i, j, k]
            self._left = np.ascontiguousarray(np.swapaxes(m, 1, 2))
        return self._left

    def unit_coeffs(self):
        return self.coeffs(np.eye(self.trace.n, dtype=complex))

    def lift_left(self, x):
        """Matrix of left multiplication by x (in the span) on coefficient
        space, i.e. the regular representation of x."""
        c = self.coeffs(x)
        return np.tensordot(c, self.left_mult_matrices(), axes=(0, 0))

    def __repr__(self):
        return "StarAlgebra(%s, dim=%d, %s)" % (
            self.name or "?", self.dimension, self.trace.label)


# ---------------------------------------------------------------------------
# constructions


def span_closure(generators, trace, max_dim=None, name="", tol=DEFAULT_TOL):
    """Smallest unital *-subalgebra containing the generators.

    Iterates products until the dimension stabilizes.  Raises
    DimensionCapError when the dimension would exceed max_dim (default:
    the full ambient dimension n^2, whose excess signals corrupt input).
    """
    n = trace.n
    if max_dim is None:
        max_dim = n * n
    gen_list = list(generators)
    gens = _as_stack(gen_list) if gen_list else \
        np.zeros((0, n, n), dtype=complex)
    seed = [np.eye(n, dtype=complex)]
    for g in gens:
        seed.append(g)
        seed.append(dagger(g))
    rows = la.mgs(trace.coords(_as_stack(seed)))
    while True:
        cur = trace.from_coords(rows)
        k = cur.shape[0]
        if k > max_dim:
            raise DimensionCapError(
                "span closure exceeded %d dimensions" % max_dim)
        prods = np.einsum("aij,bjk->abik", cur, cur).reshape(k * k, n, n)
        new_rows = la.mgs(np.vstack([rows, trace.coords(prods)]))
        if new_rows.shape[0] == k:
            return StarAlgebra(trace, cur, name=name, tol=tol)
        if new_rows.shape[0] > max_dim:
            raise DimensionCapError(
                "span closure exceeded %d dimensions" % max_dim)
        rows = new_rows


def commutant(sub, ambient_alg, name=None, generators=None):
    """Elements of ambient_alg commuting with every basis element of sub.

    sub may be a StarAlgebra or a stack of matrices.  The computation
    never materializes the adjoint-action superoperator: for each
    generator g it restricts the current candidate stack V to the null
    space of c -> sum_k c_k (g V_k - V_k g), shrinking V as it goes.
    """
    if generators is not None:
        gens = _as_stack(generators)
    elif isinstance(sub, StarAlgebra):
        gens = sub.basis_mats
    else:
        gens = _as_stack(sub)
    trace = ambient_alg.trace
    V = ambient_alg.basis_mats.copy()
    for g in gens:
        if V.shape[0] == 0:
            break
        R = np.matmul(g, V) - np.matmul(V, g)      # (k, n, n)
        M = R.reshape(R.shape[0], -1)
        ns = la.null_space(M.T)                     # (k, r), orthonormal cols
        V = np.tensordot(ns.T, V, axes=(1, 0))
        # orthonormal coefficient columns keep V orthonormal; a cheap
        # re-orthonormalization pass scrubs accumulated rounding
        V = trace.from_coords(la.mgs(trace.coords(V)))
    if V.shape[0] == 0:
        raise AlgebraStructureError("commutant collapsed to zero: ambient "
                                    "algebra misses the unit?")
    if name is None:
        name = "comm(%s in %s)" % (getattr(sub, "name", "set"),
                                   ambient_alg.name or "?")
    return StarAlgebra(trace, V, name=name)


def intersect(a1, a2, name=None):
    """Intersection of two spans inside the same ambient."""
    if a1.trace is not a2.trace:
        raise AlgebraStructureError("intersect: different ambients")
    c1 = a1._coord_rows
    c2 = a2._coord_rows
    # v in both spans  <=>  v = c1^T u = c2^T w for some (u, w)
    ns = la.null_space(np.hstack([c1.T, -c2.T]))
    if ns.shape[1] == 0:
        raise AlgebraStructureError("intersection is zero: no shared unit?")
    rows = la.mgs((ns[: a1.dimension, :].T @ c1))
    if name is None:
        name = "(%s & %s)" % (a1.name or "?", a2.name or "?")
    return StarAlgebra(a1.trace, a1.trace.from_coords(rows), name=name)


class TraceExpectation:
    """Trace-preserving conditional expectation onto a subalgebra.

    Realized as the orthogonal projection for <a,b> = tr(a*b); the
    bimodule property and trace preservation are asserted at
    construction, which is what makes the projection an expectation.
    """

    def __init__(self, source, onto, check=True, tol=1e-8, rng=None):
        self.source = source
        self.onto = onto
        if source is not None and source.trace is not onto.trace:
            raise AlgebraStructureError("expectation across ambients")
        self.trace = onto.trace
        if check:
            self._validate(tol, rng)

    def __call__(self, x):
        return self.onto.project(x)

    def _validate(self, tol, rng):
        big = self.source
        sub = self.onto
        # unit, idempotence, trace preservation on a basis of the source
        one = np.eye(self.trace.n, dtype=complex)
        if self.trace.norm(self(one) - one) > tol:
            raise AlgebraStructureError("expectation not unital")
        src = big.basis_mats if big is not None else sub.basis_mats
        tdef = np.max(np.abs(self.trace(self(src)) - self.trace(src)))
        if tdef > tol:
            raise AlgebraStructureError(
                "expectation not trace-preserving (defect %.3e)" % tdef)
        # bimodule property on a seeded sample of triples
        rng = rng or np.random.default_rng(715)
        km = src.shape[0]
        ks = sub.dimension
        m = min(24, ks * ks * km)
        ii = rng.integers(0, ks, size=m)
        jj = rng.integers(0, km, size=m)
        ll = rng.integers(0, ks, size=m)
        s1 = sub.basis_mats[ii]
        x = src[jj]
        s2 = sub.basis_mats[ll]
        lhs = self(np.einsum("aij,ajk,akl->ail", s1, x, s2))
        rhs = np.einsum("aij,ajk,akl->ail", s1, self(x), s2)
        bdef = float(np.max(np.linalg.norm(
            self.trace.coords(lhs - rhs), axis=1)))
        if bdef > 1e-7:
            raise AlgebraStructureError(
                "projection is not a bimodule map (defect %.3e): target "
                "is not a subalgebra of the source" % bdef)

    def matrix_on(self, alg):
        """Matrix of the expectation on alg's coefficient space."""
        return alg.coeffs(self(alg.basis_mats)).T


def trace_expectation(ambient_alg, sub, trace=None, check=True, tol=1e-8):
    """The tr-preserving conditional expectation of ambient_alg onto sub."""
    if trace is not None and trace is not sub.trace:
        raise AlgebraStructureError("trace does not match the subalgebra")
    return TraceExpectation(ambient_alg, sub, check=check, tol=tol)


def positive_functions(x, f, trace=None, tol=DEFAULT_TOL, min_eig=None):
    """Apply a scalar function spectrally to a positive element.

    f may be a callable on eigenvalue arrays or one of the strings
    "sqrt", "inv", "invsqrt".  Inputs with an eigenvalue at or below
    zero raise for the inverse-type functions.
    """
    named = {
        "sqrt": (np.sqrt, None),
        "inv": (lambda w: 1.0 / w, 1e-12),
        "invsqrt": (lambda w: 1.0 / np.sqrt(w), 1e-12),
    }
    if isinstance(f, str):
        if f not in named:
            raise ValueError("unknown spectral function %r" % f)
        f, floor = named[f]
        if min_eig is None:
            min_eig = floor
    m = as_matrix(x)
    out = la.positive_function(m, f, tol=tol, min_eig=min_eig)
    if isinstance(x, AlgebraElement):
        return AlgebraElement(out, x.ambient)
    return out


# ---------------------------------------------------------------------------
# block structure of a multi-matrix algebra


def center(alg, name=None):
    return commutant(alg, alg, name=name or "Z(%s)" % (alg.name or "?"))


def central_projections(alg, tol=1e-8):
    """Minimal central projections, via joint eigenspace refinement of
    the Hermitian parts of a center basis.  Deterministic."""
    z = center(alg)
    n = alg.trace.n
    herms = []
    for b in z.basis_mats:
        herms.append(la.herm(b))
        herms.append(la.herm(1j * b))
    subspaces = [np.eye(n, dtype=complex)]  # columns span C^n
    for h in herms:
        refined = []
        for u in subspaces:
            w, v = np.linalg.eigh(dagger(u) @ h @ u)
            scale = max(1.0, float(np.max(np.abs(w))))
            # split columns at spectral gaps
            start = 0
            for i in range(1, len(w) + 1):
                if i == len(w) or w[i] - w[i - 1] > 1e-6 * scale:
                    refined.append(u @ v[:, start:i])
                    start = i
        subspaces = refined
    projs = [u @ dagger(u) for u in subspaces]
    for p in projs:
        if not z.contains(p, tol=1e-7):
            raise NumericalInconsistencyError(
                "central projection left the center (refinement too fine)")
    return projs


def block_structure(alg):
    """List of (size, multiplicity, central projection) per simple block.

    size**2 = dim of the block's two-sided slice, multiplicity =
    rank(proj)/size; both must be integers.
    """
    out = []
    for p in central_projections(alg):
        slice_mats = np.einsum("ij,ajk,kl->ail", p, alg.basis_mats, p)
        rank = la.mgs(alg.trace.coords(slice_mats)).shape[0]
        size = int(round(np.sqrt(rank)))
        if size * size != rank:
            raise NumericalInconsistencyError(
                "block slice dimension %d is not a square" % rank)
        amb_rank = float(np.trace(p).real)
        mult = int(round(amb_rank / size))
        if abs(mult * size - amb_rank) > 1e-6:
            raise NumericalInconsistencyError(
                "non-integer block multiplicity: rank %.6f, size %d"
                % (amb_rank, size))
        out.append((size, mult, p))
    # deterministic order: by trace vector of the projection, then size
    out.sort(key=lambda t: (t[0], t[1],
                            tuple(np.round(np.diag(t[2]).real, 9))))
    return out


def inclusion_matrix(small, big, small_blocks=None, big_blocks=None):
    """Integer multiplicity matrix of small's blocks inside big's blocks.

    Entry [i, j] counts how often small's i-th simple block appears in
    big's j-th block, recovered from ambient ranks of products of
    central projections; integrality is asserted.
    """
    sb = small_blocks if small_blocks is not None else block_structure(small)
    bb = big_blocks if big_blocks is not None else block_structure(big)
    lam = np.zeros((len(sb), len(bb)))
    for i, (ki, mi, pi) in enumerate(sb):
        for j, (kj, mj, qj) in enumerate(bb):
            val = float(np.trace(pi @ qj).real) / (ki * mj)
            lam[i, j] = val
    rounded = np.round(lam)
    if np.max(np.abs(lam - rounded)) > 1e-6:
        raise NumericalInconsistencyError(
            "inclusion matrix is not integral: %s" % lam)
    lam = rounded.astype(int)
    # multiplicity bookkeeping must close up
    mults_small = np.array([m for (_, m, _) in sb])
    sizes_small = np.array([k for (k, _, _) in sb])
    mults_big = np.array([m for (_, m, _) in bb])
    sizes_big = np.array([k for (k, _, _) in bb])
    if not np.array_equal(lam @ mults_big, mults_small):
        raise NumericalInconsistencyError(
            "inclusion matrix inconsistent with multiplicities")
    if not np.array_equal(sizes_small @ lam, sizes_big):
        raise NumericalInconsistencyError(
            "inclusion matrix inconsistent with block sizes")
    return lam


def is_connected(lam):
    """Connectivity of the bipartite inclusion graph of Λ."""
    lam = np.asarray(lam)
    r, s = lam.shape
    seen_r, seen_s = {0}, set()
    frontier_r, frontier_s = {0}, set()
    while frontier_r or frontier_s:
        new_s = {j for i in frontier_r for j in range(s)
                 if lam[i, j] and j not in seen_s}
        new_r = {i for j in frontier_s for i in range(r)
                 if lam[i, j] and i not in seen_r}
        seen_s |= new_s
        seen_r |= new_r
        frontier_r, frontier_s = new_r, new_s
    return len(seen_r) == r and len(seen_s) == s


def full_matrix_algebra(trace, name=None):
    """The ambient M_n as a StarAlgebra (closed-form orthonormal basis
    obtained by rotating matrix units into the density's eigenbasis)."""
    n = trace.n
    w, u = np.linalg.eigh(trace.rho)
    basis = np.zeros((n * n, n, n), dtype=complex)
    idx = 0
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0 / np.sqrt(w[j])
            basis[idx] = u @ e @ dagger(u)
            idx += 1
    return StarAlgebra(trace, basis, name=name or "M%d" % n, check=False)


def random_element(alg, rng, hermitian=False):
    """Seeded random element of the span (complex Gaussian coefficients)."""
    c = rng.standard_normal(alg.dimension) + 1j * rng.standard_normal(
        alg.dimension)
    x = alg.element(c)
    if hermitian:
        x = la.herm(x)
    return x
