"""Learned world-model physics.

The energy network is invariant to planar rigid motions by construction: it
only ever sees features that are themselves invariant under rotating and
translating all coordinates while rotating all momenta. Invariance is a unit
test here, not an architectural aspiration.
"""

from dataclasses import dataclass

import numpy as np

from . import dynamics
from .dynamics import IntegratorConfig, PhaseState, VectorField
from .errors import ConfigurationError, NumericError
from .gaussians import DiagonalGaussian
from .numcore import tape
from .numcore.mlp import MlpSpec, ParamVector, init_params, mlp_forward, mlp_forward_t

# Keeps norm gradients finite at the origin without moving any value that is
# representable in float64 (additive under the sqrt, so invisible above 1e-7).
_NORM_EPS = 1e-16
# Denominator floor for radial projections at coincident points.
_COINCIDENT_GUARD = 1e-8


def feature_count(n_obj: int) -> int:
    """Momentum norms + pairwise distances + momentum dots + projections."""
    return n_obj + 2 * n_obj * (n_obj - 1)


def _norm_t(vec_t, axis):
    return tape.sqrt(tape.add(tape.tsum(tape.square(vec_t), axis=axis),
                              _NORM_EPS))


def invariant_features_t(q_t, p_t):
    """Tape featurizer on batched (B, N, d) coordinate/momentum tensors.

    Feature order (deterministic, index-lexicographic):
      1. |p_i| for each i
      2. |q_i - q_j| for i < j
      3. p_i . p_j for i < j
      4. p_i . (q_i - q_j) / max(|q_i - q_j|, guard) for ordered i != j
    """
    n = q_t.shape[1]
    feats = []
    for i in range(n):
        feats.append(_norm_t(p_t[:, i, :], axis=1))
    dists = {}
    for i in range(n):
        for j in range(i + 1, n):
            dq = tape.sub(q_t[:, i, :], q_t[:, j, :])
            dist = _norm_t(dq, axis=1)
            dists[(i, j)] = dist
            feats.append(dist)
    for i in range(n):
        for j in range(i + 1, n):
            feats.append(tape.tsum(tape.mul(p_t[:, i, :], p_t[:, j, :]),
                                   axis=1))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dq = tape.sub(q_t[:, i, :], q_t[:, j, :])
            dist = dists[(min(i, j), max(i, j))]
            denom = tape.maximum(dist, _COINCIDENT_GUARD)
            proj = tape.div(tape.tsum(tape.mul(p_t[:, i, :], dq), axis=1),
                            denom)
            feats.append(proj)
    return tape.stack(feats, axis=1)


def invariant_features(state: PhaseState) -> np.ndarray:
    """Feature vector for one state; see invariant_features_t for the order."""
    q = tape.constant(state.q[None, :, :])
    p = tape.constant(state.p[None, :, :])
    return invariant_features_t(q, p).data[0]


def se2_transform(state: PhaseState, theta: float,
                  translation) -> PhaseState:
    """Rotate everything by theta, translate coordinates only."""
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    if state.dim != 2:
        raise ConfigurationError("se2_transform is planar (d = 2)")
    t = np.asarray(translation, dtype=np.float64)
    return PhaseState(state.q @ rot.T + t, state.p @ rot.T)


@dataclass
class HamiltonianNet:
    """Invariant featurizer + scalar MLP trunk: the learned energy."""

    n_obj: int
    dim: int
    trunk_spec: MlpSpec
    trunk: ParamVector

    def __post_init__(self):
        if self.trunk_spec.in_width != feature_count(self.n_obj):
            raise ConfigurationError(
                f"trunk expects {self.trunk_spec.in_width} inputs but the "
                f"featurizer yields {feature_count(self.n_obj)}")
        if self.trunk_spec.out_width != 1:
            raise ConfigurationError("energy trunk must output one scalar")

    @classmethod
    def fresh(cls, n_obj, dim, rng, hidden=(64, 64), activation="elu"):
        spec = MlpSpec.make(feature_count(n_obj), hidden, 1,
                            activation=activation)
        return cls(n_obj, dim, spec, init_params(spec, rng))

    def energy_t(self, params_t, q_t, p_t):
        """Batched tape energy: (B, N, d) x2 -> (B,)."""
        feats = invariant_features_t(q_t, p_t)
        out = mlp_forward_t(self.trunk_spec, params_t, feats)
        return tape.reshape(out, (out.shape[0],))

    def energy(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        nd = self.n_obj * self.dim
        q = tape.constant(z[:, :nd].reshape(-1, self.n_obj, self.dim))
        p = tape.constant(z[:, nd:].reshape(-1, self.n_obj, self.dim))
        out = self.energy_t(tape.constant(self.trunk.values), q, p)
        if not np.all(np.isfinite(out.data)):
            raise NumericError("non-finite energy", z)
        return out.data

    def grads(self, z) -> np.ndarray:
        """Batched [dH/dq, dH/dp] rows via the tape (no graph retained)."""
        z = np.asarray(z, dtype=np.float64)
        nd = self.n_obj * self.dim
        q = tape.leaf(z[:, :nd].reshape(-1, self.n_obj, self.dim))
        p = tape.leaf(z[:, nd:].reshape(-1, self.n_obj, self.dim))
        h = self.energy_t(tape.constant(self.trunk.values), q, p)
        gq, gp = tape.grad(tape.tsum(h), [q, p])
        b = z.shape[0]
        return np.concatenate([gq.data.reshape(b, nd),
                               gp.data.reshape(b, nd)], axis=1)

    def h_eval(self, state: PhaseState) -> float:
        return float(self.energy(state.flat()[None, :])[0])

    def h_grads(self, state: PhaseState):
        g = self.grads(state.flat()[None, :])[0]
        nd = state.n_obj * state.dim
        shape = (state.n_obj, state.dim)
        return g[:nd].reshape(shape), g[nd:].reshape(shape)

    def copy(self):
        return HamiltonianNet(self.n_obj, self.dim, self.trunk_spec,
                              self.trunk.copy())

    def to_json(self):
        return {"n_obj": self.n_obj, "dim": self.dim,
                "trunk": self.trunk.to_json()}

    @classmethod
    def from_json(cls, doc):
        trunk = ParamVector.from_json(doc["trunk"])
        return cls(doc["n_obj"], doc["dim"], trunk.spec, trunk)


@dataclass
class InputMatrixNet:
    """Maps flattened coordinates to the (N d) x A forcing matrix g(q)."""

    n_obj: int
    dim: int
    action_dim: int
    spec: MlpSpec
    params: ParamVector

    def __post_init__(self):
        nd = self.n_obj * self.dim
        if self.spec.in_width != nd:
            raise ConfigurationError(
                f"input-matrix net expects {nd} inputs, spec has "
                f"{self.spec.in_width}")
        if self.spec.out_width != nd * self.action_dim:
            raise ConfigurationError("input-matrix net output width mismatch")

    @classmethod
    def fresh(cls, n_obj, dim, action_dim, rng, hidden=(64, 64),
              final_scale=1e-3):
        nd = n_obj * dim
        spec = MlpSpec.make(nd, hidden, nd * action_dim)
        # small final-layer init keeps early dynamics close to autonomous
        return cls(n_obj, dim, action_dim, spec,
                   init_params(spec, rng, final_scale=final_scale))

    def matrix_t(self, params_t, q_flat_t):
        out = mlp_forward_t(self.spec, params_t, q_flat_t)
        nd = self.n_obj * self.dim
        return tape.reshape(out, (out.shape[0], nd, self.action_dim))

    def matrix(self, q_flat) -> np.ndarray:
        q_flat = np.asarray(q_flat, dtype=np.float64)
        out = mlp_forward(self.spec, self.params, q_flat)
        nd = self.n_obj * self.dim
        return out.reshape(-1, nd, self.action_dim)

    def g_eval(self, q) -> np.ndarray:
        """(N, d) or flat coordinates -> (N d, A) matrix."""
        return self.matrix(np.asarray(q, dtype=np.float64).ravel()[None, :])[0]

    def copy(self):
        return InputMatrixNet(self.n_obj, self.dim, self.action_dim,
                              self.spec, self.params.copy())

    def to_json(self):
        return {"n_obj": self.n_obj, "dim": self.dim,
                "action_dim": self.action_dim, "params": self.params.to_json()}

    @classmethod
    def from_json(cls, doc):
        params = ParamVector.from_json(doc["params"])
        return cls(doc["n_obj"], doc["dim"], doc["action_dim"], params.spec,
                   params)


class LearnedField(VectorField):
    """VectorField view over a (HamiltonianNet, InputMatrixNet) pair."""

    def __init__(self, h_net: HamiltonianNet, g_net: InputMatrixNet):
        if (h_net.n_obj, h_net.dim) != (g_net.n_obj, g_net.dim):
            raise ConfigurationError("energy/input nets disagree on shape")
        self.h_net = h_net
        self.g_net = g_net
        self.n_obj = h_net.n_obj
        self.dim = h_net.dim
        self.action_dim = g_net.action_dim

    def energy(self, z):
        return self.h_net.energy(z)

    def grads(self, z):
        return self.h_net.grads(z)

    def input_matrix(self, q):
        return self.g_net.matrix(q)


@dataclass
class PriorVariance:
    """Learned state-independent diagonal covariance, as log-variances."""

    log_var: np.ndarray

    def __post_init__(self):
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if not np.all(np.isfinite(self.log_var)):
            raise ConfigurationError("non-finite prior log-variance")

    @classmethod
    def fresh(cls, n_obj, dim, initial=0.0):
        return cls(np.full(2 * n_obj * dim, float(initial)))

    def copy(self):
        return PriorVariance(self.log_var.copy())


@dataclass
class TargetHamiltonian:
    """Slow EMA copy of the online energy net, used by the intrinsic reward."""

    net: HamiltonianNet
    rho: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError("EMA decay must lie in [0, 1]")

    def h_eval(self, state: PhaseState) -> float:
        return self.net.h_eval(state)

    def energy(self, z):
        return self.net.energy(z)


def ema_update(target: TargetHamiltonian, online: HamiltonianNet,
               rho=None) -> TargetHamiltonian:
    """target <- rho * target + (1 - rho) * online, parameter-wise."""
    if target.net.trunk_spec != online.trunk_spec:
        raise ConfigurationError("EMA target and online net specs differ")
    r = target.rho if rho is None else rho
    mixed = r * target.net.trunk.values + (1.0 - r) * online.trunk.values
    net = HamiltonianNet(online.n_obj, online.dim, online.trunk_spec,
                         ParamVector(online.trunk_spec, mixed))
    return TargetHamiltonian(net, target.rho)


def prior_predict(h_net: HamiltonianNet, g_net: InputMatrixNet,
                  sigma: PriorVariance, cfg: IntegratorConfig,
                  state: PhaseState, action) -> DiagonalGaussian:
    """Gaussian over the next flat state: integrator mean, shared covariance."""
    field = LearnedField(h_net, g_net)
    mean_state = dynamics.integrator_step(field, state, action, cfg)
    return DiagonalGaussian(mean_state.flat(), sigma.log_var.copy())
