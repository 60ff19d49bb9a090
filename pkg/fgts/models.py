"""Value-function families, the Feel-Good loss and truncation.

Three model kinds are shipped:

* ``TabularFinite`` - a finite parameter set with values tabulated by
  (theta-index, context-index, action-index).
* ``LinearEmbed`` - ``f(theta, x, a) = w(theta, x) . phi(x, a)`` with
  K-dimensional weights and features; ``TabularLinearEmbed`` is the finite
  parameter set version used by the diagnostics.
* ``PureLinear`` - ``w(theta, x) = theta`` and ``phi(x, a) = a``.

Ties in the greedy action are broken by the lowest action index (finite
sets) or the first enumerated candidate (vector sets), so every operation
here is deterministic.
"""
from __future__ import annotations

import enum
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from fgts.errors import InvalidInputError, UnsupportedOperationError

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]
Param = Union[int, Vector]
Context = Any
Action = Union[int, Vector]
Actions = Any


class ModelKind(str, enum.Enum):
    tabular_finite = "tabular_finite"
    linear_embed = "linear_embed"
    pure_linear = "pure_linear"


# =========================================================
# Loss parameters and history
# =========================================================
@dataclass(frozen=True)
class LossSpec:
    """The (eta, lambda, b) triple of the Feel-Good loss."""

    eta: float = 0.25
    lam: float = 0.0
    b: float = math.inf

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidInputError(f"eta must be positive, got {self.eta}")
        if not self.lam >= 0:
            raise InvalidInputError(f"lambda must be nonnegative, got {self.lam}")
        if not self.b > 0:
            raise InvalidInputError(f"b must be positive or inf, got {self.b}")
        if math.isfinite(self.b) and self.b < 1:
            logger.warning("⚠️ truncation level b=%s is below 1, outside the analysed regime", self.b)

    @property
    def is_standard(self) -> bool:
        return self.lam == 0


@dataclass(frozen=True)
class HistoryEntry:
    context: Context
    action: Action
    reward: float
    actions: Actions = None


# =========================================================
# Action sets
# =========================================================
@dataclass(frozen=True)
class SphereArms:
    """The set ``{anchor} U {(0, a') : ||a'||_2 = radius}`` in R^d.

    The anchor is enumerated first, so it wins ties against the sphere.
    """

    anchor: Vector
    radius: float = 0.2

    @property
    def dim(self) -> int:
        return int(self.anchor.shape[0])

    def contains(self, a, atol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=np.float64)
        if a.shape != self.anchor.shape:
            return False
        if np.allclose(a, self.anchor, rtol=0.0, atol=atol):
            return True
        return abs(a[0]) <= atol and abs(np.linalg.norm(a[1:]) - self.radius) <= atol

    def best_response(self, theta: Vector) -> Tuple[Vector, float]:
        anchor_value = float(self.anchor @ theta)
        tail = theta[1:]
        norm = float(np.linalg.norm(tail))
        sphere_value = self.radius * norm
        if anchor_value >= sphere_value:
            return self.anchor, anchor_value
        arm = np.zeros_like(theta)
        if norm > 0:
            arm[1:] = self.radius * tail / norm
        else:
            arm[1] = self.radius
        return arm, sphere_value

    def worst_value(self, theta: Vector) -> float:
        return min(float(self.anchor @ theta), -self.radius * float(np.linalg.norm(theta[1:])))


def _is_index(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_))


def _check_index(value, size: int, axis: str) -> int:
    if not _is_index(value) or not 0 <= value < size:
        raise InvalidInputError(f"{axis} index {value!r} outside [0, {size})")
    return int(value)


def _pick(actions: Actions, i: int) -> Action:
    picked = actions[i]
    return int(picked) if _is_index(picked) else picked


# =========================================================
# Value models
# =========================================================
class ValueModel(ABC):
    kind: ModelKind

    @property
    def differentiable(self) -> bool:
        return False

    @property
    def n_params(self) -> Optional[int]:
        """Size of the finite parameter set, None for continuous parameters."""
        return None

    @abstractmethod
    def value(self, theta: Param, x: Context, a: Action) -> float:
        ...

    @abstractmethod
    def action_values(self, theta: Param, x: Context, actions: Actions) -> Vector:
        ...

    @abstractmethod
    def contains(self, x: Context, actions: Actions, a: Action) -> bool:
        ...

    def best(self, theta: Param, x: Context, actions: Actions) -> Tuple[Action, float]:
        values = self.action_values(theta, x, actions)
        if values.size == 0:
            raise InvalidInputError("action set is empty")
        i = int(np.argmax(values))
        return _pick(actions, i), float(values[i])

    def worst(self, theta: Param, x: Context, actions: Actions) -> float:
        values = self.action_values(theta, x, actions)
        if values.size == 0:
            raise InvalidInputError("action set is empty")
        return float(values.min())

    def value_gradient(self, theta: Param, x: Context, a: Action) -> Vector:
        raise UnsupportedOperationError(f"{self.kind.value} models have no analytic gradient")

    def all_values(self, x: Context, actions: Actions) -> NDArray[np.float64]:
        """Matrix of f(theta_j, x, a) over the finite parameter set (rows) and actions."""
        if self.n_params is None:
            raise UnsupportedOperationError(f"{self.kind.value} model has no finite parameter set")
        return np.stack([self.action_values(j, x, actions) for j in range(self.n_params)])


class TabularFinite(ValueModel):
    kind = ModelKind.tabular_finite

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 3:
            raise InvalidInputError(
                f"table must be indexed (theta, context, action), got {table.ndim} axes"
            )
        if not np.all(np.isfinite(table)):
            raise InvalidInputError("table entries must be finite")
        self.table = table

    @property
    def n_params(self) -> int:
        return self.table.shape[0]

    @property
    def n_contexts(self) -> int:
        return self.table.shape[1]

    @property
    def n_actions(self) -> int:
        return self.table.shape[2]

    def value(self, theta, x, a):
        i = _check_index(theta, self.n_params, "theta")
        j = _check_index(x, self.n_contexts, "context")
        k = _check_index(a, self.n_actions, "action")
        return float(self.table[i, j, k])

    def _action_index(self, actions) -> list:
        return [_check_index(a, self.n_actions, "action") for a in actions]

    def action_values(self, theta, x, actions):
        i = _check_index(theta, self.n_params, "theta")
        j = _check_index(x, self.n_contexts, "context")
        return self.table[i, j, self._action_index(actions)]

    def all_values(self, x, actions):
        j = _check_index(x, self.n_contexts, "context")
        return self.table[:, j, self._action_index(actions)]

    def contains(self, x, actions, a):
        return _is_index(a) and int(a) in [int(b) for b in actions]


class LinearEmbed(ValueModel):
    """``f(theta, x, a) = w(theta, x) . phi(x, a)``.

    ``weight_jacobian(theta, x)`` returns the (K, d) Jacobian of ``w`` in
    theta; without it the model cannot be used by gradient samplers.
    """

    kind = ModelKind.linear_embed

    def __init__(
        self,
        weight_fn: Callable[[Param, Context], Vector],
        feature_fn: Callable[[Context, Action], Vector],
        dim: int,
        weight_jacobian: Optional[Callable[[Param, Context], NDArray[np.float64]]] = None,
    ):
        if dim < 1:
            raise InvalidInputError(f"embedding dimension must be >= 1, got {dim}")
        self.weight_fn = weight_fn
        self.feature_fn = feature_fn
        self.dim = dim
        self.weight_jacobian = weight_jacobian

    @property
    def differentiable(self) -> bool:
        return self.weight_jacobian is not None

    def weights(self, theta, x) -> Vector:
        w = np.asarray(self.weight_fn(theta, x), dtype=np.float64)
        if w.shape != (self.dim,):
            raise InvalidInputError(f"theta: weight vector has shape {w.shape}, expected ({self.dim},)")
        return w

    def features(self, x, a) -> Vector:
        phi = np.asarray(self.feature_fn(x, a), dtype=np.float64)
        if phi.shape != (self.dim,):
            raise InvalidInputError(f"action: feature vector has shape {phi.shape}, expected ({self.dim},)")
        return phi

    def feature_matrix(self, x, actions) -> NDArray[np.float64]:
        rows = [self.features(x, a) for a in actions]
        if not rows:
            return np.empty((0, self.dim))
        return np.stack(rows)

    def value(self, theta, x, a):
        return float(self.weights(theta, x) @ self.features(x, a))

    def action_values(self, theta, x, actions):
        return self.feature_matrix(x, actions) @ self.weights(theta, x)

    def value_gradient(self, theta, x, a):
        if self.weight_jacobian is None:
            return super().value_gradient(theta, x, a)
        jac = np.asarray(self.weight_jacobian(theta, x), dtype=np.float64)
        return jac.T @ self.features(x, a)

    def contains(self, x, actions, a):
        if _is_index(a):
            return any(_is_index(b) and int(b) == int(a) for b in actions)
        a = np.asarray(a, dtype=np.float64)
        return any(np.shape(b) == a.shape and np.array_equal(np.asarray(b), a) for b in actions)


class TabularLinearEmbed(LinearEmbed):
    """Linearly embeddable model over a finite parameter set.

    ``w_table[theta, x]`` and ``phi_table[x, a]`` are K-vectors; contexts and
    actions are indices.
    """

    def __init__(self, w_table, phi_table):
        w_table = np.asarray(w_table, dtype=np.float64)
        phi_table = np.asarray(phi_table, dtype=np.float64)
        if w_table.ndim != 3 or phi_table.ndim != 3:
            raise InvalidInputError("w_table must be (theta, context, K) and phi_table (context, action, K)")
        if w_table.shape[2] != phi_table.shape[2]:
            raise InvalidInputError(
                f"embedding: weight dimension {w_table.shape[2]} != feature dimension {phi_table.shape[2]}"
            )
        if w_table.shape[1] != phi_table.shape[0]:
            raise InvalidInputError("context: weight and feature tables disagree on the context count")
        self.w_table = w_table
        self.phi_table = phi_table
        super().__init__(self._weight, self._feature, dim=w_table.shape[2])

    @property
    def n_params(self) -> int:
        return self.w_table.shape[0]

    @property
    def n_actions(self) -> int:
        return self.phi_table.shape[1]

    def _weight(self, theta, x):
        return self.w_table[
            _check_index(theta, self.n_params, "theta"),
            _check_index(x, self.w_table.shape[1], "context"),
        ]

    def _feature(self, x, a):
        return self.phi_table[
            _check_index(x, self.phi_table.shape[0], "context"),
            _check_index(a, self.n_actions, "action"),
        ]

    def all_values(self, x, actions):
        j = _check_index(x, self.w_table.shape[1], "context")
        idx = [_check_index(a, self.n_actions, "action") for a in actions]
        return self.w_table[:, j] @ self.phi_table[j, idx].T


class PureLinear(LinearEmbed):
    """Linear bandit: ``f(theta, x, a) = theta . a``; contexts are ignored.

    Action sets are either an (n_arms, d) matrix or a ``SphereArms``.
    """

    kind = ModelKind.pure_linear

    def __init__(self, dim: int):
        super().__init__(
            weight_fn=lambda theta, x: theta,
            feature_fn=lambda x, a: a,
            dim=dim,
            weight_jacobian=lambda theta, x: np.eye(dim),
        )

    def _theta(self, theta) -> Vector:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise InvalidInputError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(theta)):
            raise InvalidInputError("theta entries must be finite")
        return theta

    def _arm(self, a) -> Vector:
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (self.dim,):
            raise InvalidInputError(f"action has shape {a.shape}, expected ({self.dim},)")
        return a

    def value(self, theta, x, a):
        return float(self._theta(theta) @ self._arm(a))

    def action_values(self, theta, x, actions):
        if isinstance(actions, SphereArms):
            raise UnsupportedOperationError("a sphere action set cannot be enumerated")
        arms = np.asarray(actions, dtype=np.float64)
        if arms.ndim != 2 or arms.shape[1] != self.dim:
            raise InvalidInputError(f"action set has shape {arms.shape}, expected (n, {self.dim})")
        return arms @ self._theta(theta)

    def best(self, theta, x, actions):
        if isinstance(actions, SphereArms):
            if actions.dim != self.dim:
                raise InvalidInputError(f"action set dimension {actions.dim} != model dimension {self.dim}")
            return actions.best_response(self._theta(theta))
        return super().best(theta, x, actions)

    def worst(self, theta, x, actions):
        if isinstance(actions, SphereArms):
            return actions.worst_value(self._theta(theta))
        return super().worst(theta, x, actions)

    def value_gradient(self, theta, x, a):
        return self._arm(a).copy()

    def contains(self, x, actions, a):
        if isinstance(actions, SphereArms):
            return actions.contains(a)
        a = np.asarray(a, dtype=np.float64)
        arms = np.asarray(actions, dtype=np.float64)
        if arms.ndim != 2 or a.shape != (arms.shape[1],):
            return False
        return bool(np.any(np.all(arms == a, axis=1)))


# =========================================================
# Core operations
# =========================================================
def eval_value(model: ValueModel, theta: Param, x: Context, a: Action) -> float:
    return model.value(theta, x, a)


def greedy_action(model: ValueModel, theta: Param, x: Context, actions: Actions) -> Action:
    """The induced action a(theta, x); lowest index wins ties."""
    return model.best(theta, x, actions)[0]


def greedy_value(model: ValueModel, theta: Param, x: Context, actions: Actions) -> float:
    """f(theta, x) = max over actions of f(theta, x, a)."""
    return model.best(theta, x, actions)[1]


def truncate_value(v: float, b: float = math.inf) -> float:
    return float(max(-b, min(b, v)))


def feelgood_loss(
    spec: LossSpec,
    model: ValueModel,
    theta: Param,
    x: Context,
    actions: Actions,
    a: Action,
    r: float,
) -> float:
    """eta * (f(theta, x, a) - r)^2 - lambda * min(b, f(theta, x))."""
    if not model.contains(x, actions, a):
        raise InvalidInputError(f"action {a!r} is not in the offered action set")
    loss = spec.eta * (model.value(theta, x, a) - r) ** 2
    if spec.lam == 0:
        return loss
    return loss - spec.lam * min(spec.b, greedy_value(model, theta, x, actions))


def loss_gradient(
    spec: LossSpec,
    model: ValueModel,
    theta: Param,
    datum: HistoryEntry,
    actions: Actions = None,
) -> Vector:
    """Gradient in theta of the Feel-Good loss at one observation.

    The max over actions is differentiated through the tie-broken greedy
    action; above the truncation level b the Feel-Good term is constant.
    """
    if not model.differentiable:
        raise UnsupportedOperationError(f"{model.kind.value} models have no analytic gradient")
    actions = datum.actions if actions is None else actions
    x, a = datum.context, datum.action
    residual = model.value(theta, x, a) - datum.reward
    grad = 2.0 * spec.eta * residual * model.value_gradient(theta, x, a)
    if spec.lam > 0:
        best_action, best_value = model.best(theta, x, actions)
        if best_value <= spec.b:
            grad = grad - spec.lam * model.value_gradient(theta, x, best_action)
    return grad


def delta_loss(
    spec: LossSpec,
    model: ValueModel,
    theta: Param,
    x: Context,
    actions: Actions,
    a: Action,
    r: float,
    true_mean: float,
    true_value: float,
) -> float:
    """Excess loss of theta over the true value function at one observation."""
    squared = (model.value(theta, x, a) - r) ** 2 - (true_mean - r) ** 2
    optimism = min(spec.b, greedy_value(model, theta, x, actions)) - true_value
    return spec.eta * squared - spec.lam * optimism
