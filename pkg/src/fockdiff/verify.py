"""Invariant suites run by ``fockdiff verify`` on fixed parameter grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import diffusion as dif
from . import special as sf
from . import states as st
from .fock import FockSpace, mean_photon

SUITES = ("identities", "states", "channel")

NBS_GRID = [(s, g) for s in (0, 1, 2, 4) for g in (0.3, 0.5, 0.7)]
KAPPA_T_GRID = (0.0, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class Check:
    name: str
    params: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<34} {self.params:<28} residual={self.residual:.3e}  tol={self.tol:.0e}"


def _worst(name: str, tol: float, cases: Iterator[tuple[str, float]]) -> Check:
    """Collapse a parameter grid into one check reporting its worst case."""
    worst_params, worst = "", -1.0
    for params, residual in cases:
        if not residual <= worst:  # also catches nan
            worst_params, worst = params, residual
        if not np.isfinite(residual):
            break
    return Check(name, worst_params, worst, tol)


# --- identities -------------------------------------------------------------------


def identities() -> list[Check]:
    rng = np.random.default_rng(20140101)

    def laguerre_cases():
        for s in range(31):
            for x in np.linspace(-50.0, 50.0, 41):
                exact = sf.laguerre_explicit(s, float(x))
                yield f"s={s} x={x:g}", abs(sf.laguerre(s, x) - exact) / max(1.0, abs(exact))

    def fe_cases():
        for _ in range(1000):
            g = rng.uniform(0.01, 0.99)
            q = rng.uniform(0.0, 10.0)
            ev = dif.EvolvedNbsParams.from_params(st.NbsParams(0, g), q)
            target = -1.0 / (1.0 + q)
            yield f"gamma={g:.3f} kt={q:.3f}", abs(ev.F + ev.E - target) / abs(target)

    return [
        _worst("laguerre recurrence vs exact sum", 1e-10, laguerre_cases()),
        _worst(
            "laguerre at zero",
            1e-14,
            ((f"s={s}", abs(sf.laguerre(s, 0.0) - 1.0)) for s in range(31)),
        ),
        _worst(
            "negative binomial sum",
            1e-12,
            (
                (f"n={n} x={x}", sf.check_negative_binomial_sum(n, x, 200))
                for n in range(6)
                for x in (0.1, 0.3, 0.5, 0.7)
            ),
        ),
        _worst(
            "laguerre generating function",
            1e-9,
            (
                (f"s={s} lam={lam} z={z}", sf.check_generating_function(s, lam, z, 400))
                for s in range(4)
                for lam in (-0.5, -0.25, 0.25, 0.5)
                for z in (-5.0, -2.5, 0.0, 2.5, 5.0)
            ),
        ),
        _worst(
            "laguerre exponential integral",
            1e-10,
            (
                (f"l={l} b={b}", sf.check_laguerre_integral(l, b))
                for l in range(7)
                for b in (1.0, 1.5, 2.0, 4.0)
            ),
        ),
        _worst("E + F = -1/(1+kt)", 1e-14, fe_cases()),
    ]


# --- states -----------------------------------------------------------------------


def states() -> list[Check]:
    space = FockSpace(128)
    big = FockSpace(192)

    def nbs_mean_cases():
        for s, g in NBS_GRID:
            p = st.NbsParams(s, g)
            rho = st.nbs_state(big, p)
            if rho.trace_deficit < 1e-12:
                yield f"s={s} gamma={g}", abs(mean_photon(rho) - p.mean)

    def subtraction_cases():
        for s in range(5):
            for g in (0.3, 0.5, 0.7):
                p = st.NbsParams(s, g)
                diff = st.nbs_via_subtraction(space, p).entries - st.nbs_state(space, p).entries
                yield f"s={s} gamma={g}", float(np.abs(diff).max())

    def normal_order_cases():
        for s, g in NBS_GRID:
            p = st.NbsParams(s, g)
            diag = st.nbs_normal_ordered_diagonal(p, space.dim - 1)
            yield f"s={s} gamma={g}", float(np.abs(diag - st.nbs_state(space, p).diagonal).max())

    def lwcs_cases():
        for l in (0, 1, 2, 4):
            for lam in (0.5, 2.0 / 3.0, 1.0 / 3.0):
                p = st.LwcsParams(l, lam)
                rho = st.lwcs_state(big, p)
                yield f"l={l} lam={lam:.3f}", max(
                    abs(mean_photon(rho) - p.mean), abs(rho.trace + rho.trace_deficit - 1.0)
                )

    return [
        _worst("nbs mean", 1e-8, nbs_mean_cases()),
        _worst(
            "nbs s=0 equals chaotic",
            0.0,
            (
                (
                    f"gamma={g}",
                    float(
                        np.abs(
                            st.nbs_state(space, st.NbsParams(0, g)).entries
                            - st.chaotic_state(space, st.ChaoticParams(g)).entries
                        ).max()
                    ),
                )
                for g in (0.3, 0.5, 0.7)
            ),
        ),
        _worst("photon subtraction equivalence", 1e-12, subtraction_cases()),
        _worst("normally ordered nbs diagonal", 1e-12, normal_order_cases()),
        _worst("lwcs trace and mean", 1e-8, lwcs_cases()),
        _worst(
            "Bose-Einstein occupancy",
            1e-14,
            iter([("beta*omega=ln2", abs(st.thermal_occupancy(math.log(2.0), 1.0) - 1.0))]),
        ),
    ]


# --- channel ----------------------------------------------------------------------


def channel() -> list[Check]:
    checks = []

    def completeness_cases():
        space = FockSpace(128)
        for q in (0.5, 1.0, 2.0):
            cfg = dif.ChannelConfig(1.0, q)
            cutoff = dif.auto_interior_cutoff(space.dim, q, cfg.deficit_target)
            terms = dif.kraus_terms(space, dif.ChannelConfig(1.0, q, cutoff))
            inner = dif.interior_levels(space.dim, cutoff)
            diag = dif.completeness_diagonal(terms)[:inner]
            yield f"kt={q} M={cutoff}", float(np.abs(diag - 1.0).max())

    checks.append(_worst("kraus completeness (interior)", 1e-10, completeness_cases()))

    kraus_mean, ode_mean, trace, tri, t0, analytic_sum = [], [], [], [], [], []
    for s, g in NBS_GRID:
        p = st.NbsParams(s, g)
        spec = st.StateSpec("nbs", s=s, gamma=g)
        space = FockSpace(dif.plan_dim(spec, max(KAPPA_T_GRID)))
        rho0 = st.nbs_state(space, p)
        odes = dif.evolve_ode_grid(rho0, 1.0, KAPPA_T_GRID)
        for q, ode in zip(KAPPA_T_GRID, odes):
            tag = f"s={s} gamma={g} kt={q}"
            cfg = dif.ChannelConfig(1.0, q)
            kr = dif.apply_channel_kraus(rho0, cfg)
            an = dif.evolved_nbs_diagonal(p, cfg, space.dim - 1)
            expected = dif.evolved_mean_photon(p, cfg)
            kraus_mean.append((tag, abs(mean_photon(kr) - expected)))
            ode_mean.append((tag, abs(mean_photon(ode) - expected)))
            trace.append((tag, abs(kr.trace - 1.0)))
            n_max = dif.evolved_nbs_n_max(p, cfg)
            analytic_sum.append((tag, abs(math.fsum(dif.evolved_nbs_diagonal(p, cfg, n_max)) - 1.0)))
            tri.append((tag, float(max(
                np.abs(kr.diagonal - ode.diagonal).max(),
                np.abs(kr.diagonal - an).max(),
                np.abs(ode.diagonal - an).max(),
            ))))
            if q == 0.0:
                t0.append((tag, float(np.abs(an - rho0.diagonal).max())))
                t0.append((tag + " identity", float(np.abs(kr.entries - rho0.entries).max())))

    checks += [
        _worst("mean law (kraus)", 1e-6, iter(kraus_mean)),
        _worst("mean law (ode)", 1e-5, iter(ode_mean)),
        _worst("trace conservation (kraus)", 1e-8, iter(trace)),
        _worst("trace of closed form", 1e-10, iter(analytic_sum)),
        _worst("triple-method agreement", 1e-6, iter(tri)),
        _worst("t=0 reduction", 1e-12, iter(t0)),
    ]

    number_diag, number_mean = [], []
    for l in (0, 1, 2, 4):
        spec = st.StateSpec("number", l=l)
        space = FockSpace(dif.plan_dim(spec, 1.0))
        rho0 = st.number_state(space, l)
        for q in (0.5, 1.0):
            out = dif.apply_channel_kraus(rho0, dif.ChannelConfig(1.0, q))
            ref = st.lwcs_state(space, st.LwcsParams.from_kappa_t(l, q))
            number_diag.append((f"l={l} kt={q}", float(np.abs(out.diagonal - ref.diagonal).max())))
            number_mean.append((f"l={l} kt={q}", abs(mean_photon(out) - (l + q))))
    checks += [
        _worst("number state -> lwcs", 1e-9, iter(number_diag)),
        _worst("number state mean l+kt", 1e-8, iter(number_mean)),
    ]

    offdiag, positivity, semigroup, linear = [], [], [], []
    representative = [
        st.StateSpec("number", l=2),
        st.StateSpec("nbs", s=1, gamma=0.5),
        st.StateSpec("lwcs", l=1, lam=0.5),
        st.StateSpec("chaotic", gamma=0.6),
    ]
    t1, t2 = 0.4, 0.6
    for spec in representative:
        space = FockSpace(dif.plan_dim(spec, 2.0 * (t1 + t2)))
        rho0 = spec.build(space)
        tag = f"{spec.kind}"
        full = dif.apply_channel_kraus(rho0, dif.ChannelConfig(1.0, t1 + t2))
        mid = dif.apply_channel_kraus(rho0, dif.ChannelConfig(1.0, t1))
        two = dif.apply_channel_kraus(mid, dif.ChannelConfig(1.0, t2))
        offdiag.append((tag, full.max_offdiagonal()))
        positivity.append((tag, max(0.0, -full.min_eigenvalue())))
        semigroup.append((tag, float(np.abs(two.entries - full.entries).max())))
        linear.append((tag, abs(mean_photon(full) - mean_photon(rho0) - (t1 + t2))))
    checks += [
        _worst("diagonality preserved", 1e-14, iter(offdiag)),
        _worst("positivity preserved", 1e-10, iter(positivity)),
        _worst("semigroup composition", 1e-6, iter(semigroup)),
        _worst("mean grows by kappa*t", 1e-6, iter(linear)),
    ]
    return checks


_RUNNERS: dict[str, Callable[[], list[Check]]] = {
    "identities": identities,
    "states": states,
    "channel": channel,
}


def run(suite: str) -> list[Check]:
    names = SUITES if suite == "all" else (suite,)
    if any(n not in _RUNNERS for n in names):
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES + ('all',)}")
    out = []
    for name in names:
        out.extend(_RUNNERS[name]())
    return out
