"""Phase-space states, controlled-Hamiltonian integrators, rollouts.

The continuous dynamics are dq/dt = dH/dp, dp/dt = -dH/dq + g(q) a. Two
discretizations exist side by side: explicit Euler (used while fitting the
model, where gradient stability matters) and an explicit leapfrog with the
control force applied in both momentum half-kicks (used for imagination and
evaluation, where long-horizon energy behavior matters). Module-level step
counters let callers assert which scheme actually ran.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericError

STEP_COUNTS = {"euler": 0, "leapfrog": 0}


def reset_step_counts():
    STEP_COUNTS["euler"] = 0
    STEP_COUNTS["leapfrog"] = 0


@dataclass
class PhaseState:
    """N objects with d-dimensional coordinates Q and momenta P."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.q.shape != self.p.shape:
            raise ConfigurationError(
                f"Q shape {self.q.shape} != P shape {self.p.shape}")
        if self.q.ndim != 2 or self.q.shape[0] < 1:
            raise ConfigurationError("state must be (N, d) with N >= 1")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise NumericError("non-finite phase state", self)

    @property
    def n_obj(self):
        return self.q.shape[0]

    @property
    def dim(self):
        return self.q.shape[1]

    def flat(self) -> np.ndarray:
        """[q entries, p entries], length 2*N*d."""
        return np.concatenate([self.q.ravel(), self.p.ravel()])

    @classmethod
    def from_flat(cls, z, n_obj, dim):
        z = np.asarray(z, dtype=np.float64)
        nd = n_obj * dim
        return cls(z[:nd].reshape(n_obj, dim), z[nd:].reshape(n_obj, dim))

    def copy(self):
        return PhaseState(self.q.copy(), self.p.copy())


class VectorField:
    """Hamiltonian evaluator plus input-matrix evaluator, batched on flats.

    Subclasses provide the three batched methods over z = [q_flat, p_flat]
    rows. ``n_obj``, ``dim``, ``action_dim`` describe the phase space.
    """

    n_obj: int
    dim: int
    action_dim: int

    def energy(self, z):
        """(B, 2nd) -> (B,) Hamiltonian values."""
        raise NotImplementedError

    def grads(self, z):
        """(B, 2nd) -> (B, 2nd) rows [dH/dq, dH/dp]."""
        raise NotImplementedError

    def input_matrix(self, q):
        """(B, nd) -> (B, nd, A) forcing matrix g(q)."""
        raise NotImplementedError

    # single-state conveniences -------------------------------------------
    def h_eval(self, state: PhaseState) -> float:
        return float(self.energy(state.flat()[None, :])[0])

    def h_grads(self, state: PhaseState):
        g = self.grads(state.flat()[None, :])[0]
        nd = state.n_obj * state.dim
        shape = (state.n_obj, state.dim)
        return g[:nd].reshape(shape), g[nd:].reshape(shape)

    def g_eval(self, state: PhaseState) -> np.ndarray:
        return self.input_matrix(state.q.ravel()[None, :])[0]


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "leapfrog"
    dt: float = 0.1

    def __post_init__(self):
        if self.scheme not in ("euler", "leapfrog"):
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")


def _force(field, q, actions):
    """g(q) a for batched flats: (B, nd)."""
    g = field.input_matrix(q)
    return np.einsum("bia,ba->bi", g, actions)


def _check_finite(z, context):
    if not np.all(np.isfinite(z)):
        raise NumericError(f"non-finite state after {context}", z)


def euler_step_batch(field, z, actions, dt):
    """Explicit Euler on (B, 2nd) flats, gradients evaluated at (q, p)."""
    STEP_COUNTS["euler"] += 1
    nd = field.n_obj * field.dim
    grads = field.grads(z)
    _check_finite(grads, "euler gradient evaluation")
    dq, dp = grads[:, nd:], -grads[:, :nd]
    force = _force(field, z[:, :nd], actions)
    out = np.empty_like(z)
    out[:, :nd] = z[:, :nd] + dt * dq
    out[:, nd:] = z[:, nd:] + dt * (dp + force)
    _check_finite(out, "euler step")
    return out


def leapfrog_step_batch(field, z, actions, dt):
    """Explicit leapfrog with control, three stages on (B, 2nd) flats.

    half kick:  p_half = p + dt/2 (-dH/dq(q, p) + g(q) a)
    drift:      q'     = q + dt    dH/dp(q, p_half)
    half kick:  p'     = p_half + dt/2 (-dH/dq(q', p_half) + g(q') a)

    The action is held constant across the step and enters both half-kicks.
    """
    STEP_COUNTS["leapfrog"] += 1
    nd = field.n_obj * field.dim
    q, p = z[:, :nd], z[:, nd:]

    grads = field.grads(z)
    _check_finite(grads, "leapfrog first gradient evaluation")
    p_half = p + 0.5 * dt * (-grads[:, :nd] + _force(field, q, actions))

    zh = np.concatenate([q, p_half], axis=1)
    grads_h = field.grads(zh)
    _check_finite(grads_h, "leapfrog drift gradient evaluation")
    q_new = q + dt * grads_h[:, nd:]

    z2 = np.concatenate([q_new, p_half], axis=1)
    grads_2 = field.grads(z2)
    _check_finite(grads_2, "leapfrog second gradient evaluation")
    p_new = p_half + 0.5 * dt * (-grads_2[:, :nd]
                                 + _force(field, q_new, actions))

    out = np.concatenate([q_new, p_new], axis=1)
    _check_finite(out, "leapfrog step")
    return out


_STEPPERS = {"euler": euler_step_batch, "leapfrog": leapfrog_step_batch}


def _single(stepper, field, state, action, dt):
    action = np.atleast_1d(np.asarray(action, dtype=np.float64))
    if action.shape != (field.action_dim,):
        raise ConfigurationError(
            f"action shape {action.shape} != ({field.action_dim},)")
    z = stepper(field, state.flat()[None, :], action[None, :], dt)
    return PhaseState.from_flat(z[0], state.n_obj, state.dim)


def euler_step(field, state: PhaseState, action, dt) -> PhaseState:
    return _single(euler_step_batch, field, state, action, dt)


def leapfrog_step(field, state: PhaseState, action, dt) -> PhaseState:
    return _single(leapfrog_step_batch, field, state, action, dt)


def integrator_step(field, state, action, cfg: IntegratorConfig) -> PhaseState:
    return _single(_STEPPERS[cfg.scheme], field, state, action, cfg.dt)


def external_power(field, state: PhaseState, action) -> float:
    """Instantaneous power (dH/dp)^T g(q) a delivered by the control."""
    action = np.atleast_1d(np.asarray(action, dtype=np.float64))
    _, dp = field.h_grads(state)
    force = field.g_eval(state) @ action
    return float(dp.ravel() @ force)


@dataclass
class TrajectoryStep:
    t: int
    state: PhaseState
    action: np.ndarray
    h_value: float


@dataclass
class PhaseTrajectory:
    """Time-ordered step records; ``failed_at`` marks a truncating error."""

    steps: list = field(default_factory=list)
    failed_at: int | None = None

    def __len__(self):
        return len(self.steps)

    def h_series(self):
        return np.array([s.h_value for s in self.steps])

    def states(self):
        return [s.state for s in self.steps]

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for s in self.steps:
                fh.write(json.dumps({
                    "t": s.t, "q": s.state.q.tolist(), "p": s.state.p.tolist(),
                    "a": np.asarray(s.action).tolist(), "h": s.h_value}) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        traj = cls()
        with open(path) as fh:
            for line in fh:
                doc = json.loads(line)
                traj.steps.append(TrajectoryStep(
                    doc["t"], PhaseState(np.array(doc["q"]), np.array(doc["p"])),
                    np.asarray(doc["a"], dtype=np.float64), doc["h"]))
        return traj


def rollout(field, cfg: IntegratorConfig, z0: PhaseState,
            actions) -> PhaseTrajectory:
    """Integrate |actions| steps from z0, recording H along the way.

    A numeric failure truncates: the partial trajectory is returned with
    ``failed_at`` set to the index of the failing step.
    """
    actions = [np.atleast_1d(np.asarray(a, dtype=np.float64)) for a in actions]
    if len(actions) == 0:
        raise ConfigurationError("rollout needs at least one action")
    traj = PhaseTrajectory()
    state = z0.copy()
    traj.steps.append(TrajectoryStep(0, state, np.zeros(field.action_dim),
                                     field.h_eval(state)))
    for i, a in enumerate(actions):
        try:
            state = integrator_step(field, state, a, cfg)
            h = field.h_eval(state)
            if not np.isfinite(h):
                raise NumericError("non-finite H along rollout", state)
        except NumericError:
            traj.failed_at = i
            return traj
        traj.steps.append(TrajectoryStep(i + 1, state, a, h))
    return traj


def rollout_batch(field, scheme, dt, z0, actions):
    """Batched open-loop rollout used by planning and evaluation.

    ``z0`` is (B, 2nd); ``actions`` is (B, H, A). Returns states of shape
    (B, H+1, 2nd). No per-step H recording; callers evaluate energies on the
    slices they need.
    """
    stepper = _STEPPERS[scheme]
    B, H, _ = actions.shape
    out = np.empty((B, H + 1, z0.shape[1]))
    out[:, 0] = z0
    z = z0
    for t in range(H):
        z = stepper(field, z, actions[:, t], dt)
        out[:, t + 1] = z
    return out
