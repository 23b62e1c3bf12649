"""Survival analysis over capture times.

Subjects are evaders; the event is capture, and evaders still alive at the
end of an episode are right-censored at the horizon. The product-limit
estimate treats a subject censored between two event times as at risk
through the following event time: the at-risk count only drops by the
censored subjects after the event they last witnessed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class SurvivalCurve:
    """Kaplan-Meier step function with its event bookkeeping."""

    horizon: float
    n_subjects: int
    event_times: list = field(default_factory=list)
    events: list = field(default_factory=list)       # d_i per event time
    at_risk: list = field(default_factory=list)      # n_i per event time
    survival: list = field(default_factory=list)     # S(t_i)

    def survival_at(self, t):
        """Step-function lookup: S(t) = prod_{t_i <= t} (1 - d_i / n_i)."""
        value = 1.0
        for time, s in zip(self.event_times, self.survival):
            if time <= t:
                value = s
            else:
                break
        return value

    def to_csv(self, path, step=1):
        """The survival table shape used in reports: time, probability."""
        times = range(0, int(self.horizon) + 1, step)
        with open(path, "w") as fh:
            fh.write("time,survival_probability\n")
            for t in times:
                fh.write(f"{t},{self.survival_at(t):.6f}\n")


def kaplan_meier(capture_times, horizon):
    """Product-limit survival estimate.

    ``capture_times`` is a list of (time, captured) pairs, one per subject;
    ``captured`` False means right-censored at that time. Times must lie in
    [0, horizon].
    """
    if not capture_times:
        raise ValueError("no subjects")
    for t, _ in capture_times:
        if t < 0:
            raise ValueError("negative event time")
        if t > horizon:
            raise ValueError("event time beyond the horizon")

    event_counts = {}
    censor_times = []
    for t, captured in capture_times:
        if captured:
            event_counts[t] = event_counts.get(t, 0) + 1
        else:
            censor_times.append(t)

    curve = SurvivalCurve(horizon=horizon, n_subjects=len(capture_times))
    at_risk = len(capture_times)
    remaining_censors = sorted(censor_times)
    surv = 1.0
    for t in sorted(event_counts):
        d = event_counts[t]
        surv *= 1.0 - d / at_risk
        curve.event_times.append(t)
        curve.events.append(d)
        curve.at_risk.append(at_risk)
        curve.survival.append(surv)
        # censored subjects leave the risk set after the event they reached
        dropped = [c for c in remaining_censors if c <= t]
        remaining_censors = remaining_censors[len(dropped):]
        at_risk -= d + len(dropped)
    return curve


def _chi2_survival_1df(x):
    """Upper-tail probability of a chi-square with one degree of freedom."""
    return math.erfc(math.sqrt(max(x, 0.0) / 2.0))


def log_rank(group_a, group_b):
    """Two-sample log-rank test on (time, captured) lists.

    Returns (chi-square statistic, p-value). Degenerate inputs with no
    events, or with no variance across event times, give (0.0, 1.0).
    """
    if not group_a or not group_b:
        raise ValueError("both groups need at least one subject")

    def split(group):
        events, censors = {}, []
        for t, captured in group:
            if t < 0:
                raise ValueError("negative event time")
            if captured:
                events[t] = events.get(t, 0) + 1
            else:
                censors.append(t)
        return events, sorted(censors)

    events_a, censors_a = split(group_a)
    events_b, censors_b = split(group_b)
    times = sorted(set(events_a) | set(events_b))
    if not times:
        return 0.0, 1.0

    n_a, n_b = len(group_a), len(group_b)
    observed_minus_expected = 0.0
    variance = 0.0
    for t in times:
        d_a = events_a.get(t, 0)
        d_b = events_b.get(t, 0)
        d = d_a + d_b
        n = n_a + n_b
        if n > 1 and 0 < d < n:
            expected_a = d * n_a / n
            observed_minus_expected += d_a - expected_a
            variance += d * (n_a / n) * (n_b / n) * (n - d) / (n - 1)
        elif d == n and n > 1:
            observed_minus_expected += d_a - d * n_a / n
        drop_a = [c for c in censors_a if c <= t]
        censors_a = censors_a[len(drop_a):]
        drop_b = [c for c in censors_b if c <= t]
        censors_b = censors_b[len(drop_b):]
        n_a -= d_a + len(drop_a)
        n_b -= d_b + len(drop_b)

    if variance <= 0:
        return 0.0, 1.0
    chi2 = observed_minus_expected ** 2 / variance
    return float(chi2), float(_chi2_survival_1df(chi2))
