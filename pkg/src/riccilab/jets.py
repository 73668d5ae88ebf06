"""Total derivatives, the variational (Euler) operator, vector-field
prolongation, and the classical infinitesimal invariance residual."""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import (
    Expr,
    IPow,
    Jet,
    OrderNotSupportedError,
    Prod,
    Rat,
    Sum,
    Var,
    ZERO,
    diff_partial,
    jet_vars,
    max_jet_order,
    normalize,
    substitute,
)

T = Var("t")
X = Var("x")
Y = Var("y")
BASE = (T, X, Y)
_SLOT = {"t": 0, "x": 1, "y": 2}

U = Jet("u", (0, 0, 0))
U_T = Jet("u", (1, 0, 0))
U_X = Jet("u", (0, 1, 0))
U_Y = Jet("u", (0, 0, 1))
U_XY = Jet("u", (0, 1, 1))


def _as_var(v) -> Var:
    if isinstance(v, Var):
        return v
    if isinstance(v, str) and v in _SLOT:
        return Var(v)
    raise ValueError(f"not an independent variable: {v!r}")


def jet_shift(j: Jet, v: Var) -> Jet:
    idx = list(j.index)
    idx[_SLOT[v.name]] += 1
    return Jet(j.dep, tuple(idx))


def total_derivative(e: Expr, v) -> Expr:
    """D_v e = de/dv + sum over jets u_J in e of (de/du_J) * u_{J+v}."""
    v = _as_var(v)
    e = normalize(e)
    terms = [diff_partial(e, v)]
    for j in sorted(jet_vars(e), key=lambda j: j.index):
        de = diff_partial(e, j)
        if de != ZERO:
            terms.append(Prod((de, jet_shift(j, v))))
    return normalize(Sum(tuple(terms)))


def euler_operator(e: Expr) -> Expr:
    """Variational derivative with respect to u, complete through second
    order:

        E(e) = de/du - sum_i D_i de/du_i + sum_{i<=j} D_i D_j de/du_ij

    Annihilates exactly the total divergences of first-order fluxes.
    Input beyond jet order 2 is rejected.
    """
    e = normalize(e)
    if max_jet_order(e) > 2:
        raise OrderNotSupportedError("order not supported")
    terms = [diff_partial(e, U)]
    for v in BASE:
        de = diff_partial(e, jet_shift(U, v))
        if de != ZERO:
            terms.append(Prod((Rat(-1), total_derivative(de, v))))
    for i, vi in enumerate(BASE):
        for vj in BASE[i:]:
            jet = jet_shift(jet_shift(U, vi), vj)
            de = diff_partial(e, jet)
            if de != ZERO:
                terms.append(total_derivative(total_derivative(de, vj), vi))
    return normalize(Sum(tuple(terms)))


@dataclass(frozen=True)
class VectorField:
    """Point-symmetry generator tau*d/dt + xi*d/dx + eta*d/dy + phi*d/du;
    coefficients may depend on t, x, y, u but on no derivative of u."""

    tau: Expr
    xi: Expr
    eta: Expr
    phi: Expr

    def __post_init__(self):
        for name in ("tau", "xi", "eta", "phi"):
            coeff = normalize(getattr(self, name))
            if max_jet_order(coeff) > 0:
                raise ValueError(f"{name} depends on a derivative of u")
            object.__setattr__(self, name, coeff)

    def coefficient(self, v: Var) -> Expr:
        return (self.tau, self.xi, self.eta)[_SLOT[v.name]]

    def scale(self, c: Expr) -> "VectorField":
        return VectorField(*(normalize(Prod((c, comp)))
                             for comp in (self.tau, self.xi, self.eta, self.phi)))

    def plus(self, other: "VectorField") -> "VectorField":
        return VectorField(*(normalize(Sum((a, b))) for a, b in zip(
            (self.tau, self.xi, self.eta, self.phi),
            (other.tau, other.xi, other.eta, other.phi))))


@dataclass(frozen=True)
class ProlongedField:
    """A vector field together with its jet coefficients phi^J up to the
    requested order (phi^J for J = 0 is the base phi)."""

    base: VectorField
    order: int
    coefficients: dict = field(hash=False)

    def apply(self, e: Expr) -> Expr:
        """X^(order) acting on e."""
        e = normalize(e)
        if max_jet_order(e) > self.order:
            raise OrderNotSupportedError("order not supported")
        terms = []
        for v in BASE:
            de = diff_partial(e, v)
            if de != ZERO:
                terms.append(Prod((self.base.coefficient(v), de)))
        for j in jet_vars(e):
            de = diff_partial(e, j)
            if de != ZERO:
                terms.append(Prod((self.coefficients[j.index], de)))
        return normalize(Sum(tuple(terms)))


def prolong(v: VectorField, order: int = 2) -> ProlongedField:
    """Standard prolongation: phi^{J,i} = D_i(phi^J) - u_{J+t} D_i(tau)
    - u_{J+x} D_i(xi) - u_{J+y} D_i(eta)."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    coeffs = {(0, 0, 0): v.phi}
    d_coeff = {w: {b: total_derivative(v.coefficient(b), w) for b in BASE}
               for w in BASE}

    def extend(j_index, w: Var) -> Expr:
        base_jet = Jet("u", j_index)
        terms = [total_derivative(coeffs[j_index], w)]
        for b in BASE:
            terms.append(Prod((Rat(-1), jet_shift(base_jet, b),
                               d_coeff[w][b])))
        return normalize(Sum(tuple(terms)))

    frontier = [(0, 0, 0)]
    for _ in range(order):
        new = []
        for j_index in frontier:
            for w in BASE:
                idx = jet_shift(Jet("u", j_index), w).index
                if idx not in coeffs:
                    coeffs[idx] = extend(j_index, w)
                    new.append(idx)
        frontier = new
    return ProlongedField(base=v, order=order, coefficients=coeffs)


def solve_for_ut(delta: Expr) -> Expr:
    """Rewrite delta = 0 as u_t = rhs.  Requires u_t to be the only
    t-derivative present and to occur linearly."""
    delta = normalize(delta)
    for j in jet_vars(delta):
        if j.index[0] > 0 and j != U_T:
            raise OrderNotSupportedError("cannot restrict on-shell")
    lead = diff_partial(delta, U_T)
    if lead == ZERO or jet_vars(lead) & {U_T}:
        raise OrderNotSupportedError("cannot restrict on-shell")
    rest = substitute(delta, {U_T: ZERO})
    return normalize(Prod((Rat(-1), rest, IPow(lead, -1))))


def onshell(e: Expr, rhs: Expr) -> Expr:
    """Substitute u_t (and its total-derivative consequences) by the flow's
    right-hand side until no t-derivative jets remain."""
    e = normalize(e)
    while True:
        t_jets = [j for j in jet_vars(e) if j.index[0] > 0]
        if not t_jets:
            return e
        j = max(t_jets, key=lambda j: (j.index[0], j.order))
        image = rhs
        for _ in range(j.index[0] - 1):
            image = onshell(total_derivative(image, T), rhs)
        for _ in range(j.index[1]):
            image = total_derivative(image, X)
        for _ in range(j.index[2]):
            image = total_derivative(image, Y)
        e = substitute(e, {j: image})


def invariance_residual(v: VectorField, delta: Expr) -> Expr:
    """Classical symmetry test: X^(2)(delta) restricted to the flow's
    solutions; zero exactly when v generates a point symmetry."""
    pf = prolong(v, 2)
    rhs = solve_for_ut(delta)
    return onshell(pf.apply(delta), rhs)


def ricci_delta() -> Expr:
    """u_t - u_xy/u + u_x*u_y/u^2."""
    return normalize(Sum((
        U_T,
        Prod((Rat(-1), U_XY, IPow(U, -1))),
        Prod((U_X, U_Y, IPow(U, -2))),
    )))
