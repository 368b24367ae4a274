from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from mataformer.errors import ShapeError
from mataformer.lib.tensor.tensor import ArrayLike, Tensor, as_tensor, no_grad

#: Denominator floor of the relative error, keeps near-zero gradients comparable
REL_ERROR_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    """GradCheckReport summarizes a comparison of reverse-mode and finite-difference gradients"""

    #: largest relative error over the compared (non-kink) coordinates
    max_rel_error: float = field(kw_only=True, default=0.0)
    #: tolerance the comparison was judged against
    tol: float = field(kw_only=True)
    #: location of the largest relative error
    worst: str = field(kw_only=True, default="")
    #: number of coordinates compared
    checked: int = field(kw_only=True, default=0)
    #: coordinates compared per parameter name; kinks and NaNs do not count
    compared: dict[str, int] = field(kw_only=True, default_factory=dict)
    #: coordinates where one-sided differences disagree (clamp edges, |x| at 0)
    kinks: list[str] = field(kw_only=True, default_factory=list)
    #: coordinates where either gradient is NaN
    nan_locations: list[str] = field(kw_only=True, default_factory=list)

    @property
    def passed(self) -> bool:
        return len(self.nan_locations) == 0 and self.max_rel_error < self.tol

    def merge(self, other: "GradCheckReport") -> "GradCheckReport":
        worse = other if other.max_rel_error > self.max_rel_error else self
        return GradCheckReport(
            max_rel_error=worse.max_rel_error,
            tol=self.tol,
            worst=worse.worst,
            checked=self.checked + other.checked,
            compared={
                name: self.compared.get(name, 0) + other.compared.get(name, 0)
                for name in {**self.compared, **other.compared}
            },
            kinks=self.kinks + other.kinks,
            nan_locations=self.nan_locations + other.nan_locations,
        )


def _compare(
    report: GradCheckReport,
    group: str,
    location: str,
    analytic: float,
    f_minus: float,
    f_zero: float,
    f_plus: float,
    h: float,
    kink_rtol: float,
):
    numeric = (f_plus - f_minus) / (2.0 * h)
    if np.isnan(analytic) or np.isnan(numeric):
        report.nan_locations.append(location)
        return

    forward = (f_plus - f_zero) / h
    backward = (f_zero - f_minus) / h
    if abs(forward - backward) > kink_rtol * max(1.0, abs(forward), abs(backward)):
        report.kinks.append(location)
        return

    rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_ERROR_FLOOR)
    report.checked += 1
    report.compared[group] = report.compared.get(group, 0) + 1
    if rel > report.max_rel_error:
        report.max_rel_error = rel
        report.worst = location


def _scalar(value: Tensor) -> float:
    if value.size != 1:
        raise ShapeError("gradient check objective", "a scalar", value.shape)
    return value.item()


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: ArrayLike,
    h: float = 1e-6,
    tol: float = 1e-4,
    kink_rtol: float = 1e-2,
) -> GradCheckReport:
    """grad_check compares the reverse-mode gradient of a scalar function with central differences

    Args:
        f: scalar-valued function of one tensor
        x: point at which to compare, evaluated in float64
        h: finite-difference step, 1e-6..1e-3 for float64
        tol: maximum relative error for the check to pass
        kink_rtol: relative disagreement of one-sided differences that marks a
            non-differentiable coordinate; such coordinates are reported and
            excluded from pass/fail

    Returns:
        GradCheckReport with the max relative error and any kink or NaN locations

    """
    x0 = np.array(as_tensor(x).data, dtype=np.float64)
    point = Tensor(x0.copy(), requires_grad=True)
    out = f(point)
    _scalar(out)
    out.backward()
    analytic = point.grad if point.grad is not None else np.zeros_like(x0)

    report = GradCheckReport(tol=tol)
    with no_grad():
        f_zero = _scalar(f(Tensor(x0)))
        for idx in np.ndindex(x0.shape):
            shifted = x0.copy()
            shifted[idx] += h
            f_plus = _scalar(f(Tensor(shifted)))
            shifted[idx] = x0[idx] - h
            f_minus = _scalar(f(Tensor(shifted)))
            _compare(
                report,
                "x",
                f"x{list(idx)}",
                float(analytic[idx]),
                f_minus,
                f_zero,
                f_plus,
                h,
                kink_rtol,
            )
    return report


def grad_check_parameters(
    loss_fn: Callable[[], Tensor],
    parameters: Iterable[tuple[str, Tensor]],
    h: float = 1e-6,
    tol: float = 1e-4,
    kink_rtol: float = 1e-2,
    max_per_parameter: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """grad_check_parameters runs the same comparison over named parameters in place

    Each parameter entry is perturbed in place, the closure re-evaluated, and
    the entry restored. When ``max_per_parameter`` is set, that many entries
    are sampled per parameter with a seeded generator. ``report.compared``
    lists every parameter, so one whose samples all land on kinks shows 0.
    """
    params = list(parameters)
    for _, p in params:
        p.zero_grad()
    out = loss_fn()
    _scalar(out)
    out.backward()
    grads = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params
    }

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tol=tol)
    with no_grad():
        f_zero = _scalar(loss_fn())
        for name, p in params:
            report.compared[name] = 0
            indices = list(np.ndindex(p.data.shape))
            if max_per_parameter is not None and len(indices) > max_per_parameter:
                picks = rng.choice(len(indices), size=max_per_parameter, replace=False)
                indices = [indices[i] for i in sorted(picks)]
            for idx in indices:
                original = p.data[idx]
                p.data[idx] = original + h
                f_plus = _scalar(loss_fn())
                p.data[idx] = original - h
                f_minus = _scalar(loss_fn())
                p.data[idx] = original
                _compare(
                    report,
                    name,
                    f"{name}{list(idx)}",
                    float(grads[name][idx]),
                    f_minus,
                    f_zero,
                    f_plus,
                    h,
                    kink_rtol,
                )
    for _, p in params:
        p.zero_grad()
    return report
