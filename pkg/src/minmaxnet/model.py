"""MinMax networks: sums of min/max neurons over affine basic neurons.

A network maps an augmented input ``x = (1, x')`` to

    y_hat(x) = sum over Min neurons of min_k x @ w_jk
             + sum over Max neurons of max_k x @ w_jk

Weights are stored per neuron as a ``(K_j, N+1)`` array.  The flattened
parameter vector concatenates the neurons in order and, inside a neuron,
the basic neurons in order (the stacked ``W_j``).
"""

import json
from dataclasses import dataclass, field

import numpy as np

MIN = "min"
MAX = "max"
KINDS = (MIN, MAX)


def augment(x_raw):
    """Bias-first augmentation of one raw input or a batch of them."""
    x_raw = np.asarray(x_raw, dtype=np.float64)
    if x_raw.ndim == 0:
        x_raw = x_raw.reshape(1)
    if x_raw.ndim == 1:
        return np.concatenate(([1.0], x_raw))
    return np.hstack([np.ones((x_raw.shape[0], 1)), x_raw])


def check_augmented(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"augmented input must be 1-D or 2-D, got shape {x.shape}")
    if not np.all(x[:, 0] == 1.0):
        raise ValueError("augmented input must have 1 as its first component")
    if not np.all(np.isfinite(x)):
        raise ValueError("augmented input has non-finite components")
    return x


@dataclass
class Neuron:
    kind: str
    weights: np.ndarray  # (K, N+1), one basic neuron per row

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"neuron kind must be 'min' or 'max', got {self.kind!r}")
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2 or w.shape[0] < 1:
            raise ValueError("a neuron needs at least one basic neuron")
        if not np.all(np.isfinite(w)):
            raise ValueError("neuron weights must be finite")
        self.weights = w

    @property
    def n_basic(self):
        return self.weights.shape[0]

    def basic_values(self, X):
        """``z[m, k] = X[m] @ w_k`` for a batch of augmented inputs.

        Summed column by column rather than through BLAS, whose kernel (and
        rounding) depends on the matrix shape: a copied row must give
        bit-identical values to its original.
        """
        W = self.weights
        Z = X[:, :1] * W[:, 0]
        for c in range(1, W.shape[1]):
            Z += X[:, c : c + 1] * W[:, c]
        return Z

    def combine(self, Z):
        return Z.min(axis=1) if self.kind == MIN else Z.max(axis=1)

    def select(self, Z):
        # argmin/argmax return the first extremal index: ties go to the lowest k
        return Z.argmin(axis=1) if self.kind == MIN else Z.argmax(axis=1)

    def copy(self):
        return Neuron(self.kind, self.weights.copy())


@dataclass
class Network:
    input_dim: int
    neurons: list = field(default_factory=list)

    def __post_init__(self):
        if self.input_dim < 0:
            raise ValueError("input_dim must be non-negative")
        if not self.neurons:
            raise ValueError("a network needs at least one neuron")
        for j, nr in enumerate(self.neurons):
            if nr.weights.shape[1] != self.input_dim + 1:
                raise ValueError(
                    f"neuron {j} has weight width {nr.weights.shape[1]}, "
                    f"expected {self.input_dim + 1}"
                )

    @property
    def n_neurons(self):
        return len(self.neurons)

    @property
    def n_basic(self):
        return sum(nr.n_basic for nr in self.neurons)

    @property
    def n_params(self):
        return self.n_basic * (self.input_dim + 1)

    def basic_counts(self):
        return [nr.n_basic for nr in self.neurons]

    def offsets(self):
        """Start of each neuron's block in the flattened parameter vector."""
        width = self.input_dim + 1
        out = np.zeros(self.n_neurons + 1, dtype=np.int64)
        out[1:] = np.cumsum([nr.n_basic * width for nr in self.neurons])
        return out

    def flat(self):
        return np.concatenate([nr.weights.ravel() for nr in self.neurons])

    def with_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        off = self.offsets()
        width = self.input_dim + 1
        neurons = [
            Neuron(nr.kind, theta[off[j] : off[j + 1]].reshape(-1, width))
            for j, nr in enumerate(self.neurons)
        ]
        return Network(self.input_dim, neurons)

    def copy(self):
        return Network(self.input_dim, [nr.copy() for nr in self.neurons])

    def _inputs(self, x):
        X = check_augmented(x)
        if X.shape[1] != self.input_dim + 1:
            raise ValueError(
                f"input has {X.shape[1] - 1} raw components, network expects {self.input_dim}"
            )
        return X

    # -- serialisation -------------------------------------------------

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "neurons": [
                {"kind": nr.kind, "weights": nr.weights.tolist()} for nr in self.neurons
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            neurons = [Neuron(d["kind"], d["weights"]) for d in doc["neurons"]]
            return cls(int(doc["input_dim"]), neurons)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed network document: {exc}") from exc


def save_network(net, path):
    # repr of a Python float is the shortest string that round-trips exactly
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh, indent=1)
        fh.write("\n")


def load_network(path):
    with open(path) as fh:
        return Network.from_dict(json.load(fh))


def evaluate(net, x):
    """Network output at one augmented input (float) or a batch (array)."""
    X = net._inputs(x)
    y = np.zeros(X.shape[0])
    for nr in net.neurons:
        y += nr.combine(nr.basic_values(X))
    if np.ndim(x) == 1:
        return float(y[0])
    return y


def activation_pattern(net, x):
    """Index of the active basic neuron per neuron, ties to the lowest index.

    Returns an int array of shape ``(J,)`` for a single input or
    ``(M, J)`` for a batch.
    """
    X = net._inputs(x)
    P = np.empty((X.shape[0], net.n_neurons), dtype=np.int64)
    for j, nr in enumerate(net.neurons):
        P[:, j] = nr.select(nr.basic_values(X))
    if np.ndim(x) == 1:
        return P[0]
    return P


def stacked_activation(net, x, pattern=None):
    """Per-neuron activation blocks ``A_j(x)``: x in block k*, zeros elsewhere.

    Returns a list of ``(K_j, N+1)`` arrays for a single input.
    """
    x = net._inputs(x)[0]
    if pattern is None:
        pattern = activation_pattern(net, x)
    blocks = []
    for j, nr in enumerate(net.neurons):
        b = np.zeros_like(nr.weights)
        b[pattern[j]] = x
        blocks.append(b)
    return blocks


def activation_matrix(net, X, patterns):
    """Rows are the flattened ``A(x_m)``; ``activation_matrix @ net.flat()`` is y_hat."""
    X = net._inputs(X)
    M = X.shape[0]
    width = net.input_dim + 1
    off = net.offsets()
    Phi = np.zeros((M, net.n_params))
    rows = np.arange(M)
    for j in range(net.n_neurons):
        start = off[j] + patterns[:, j] * width
        for c in range(width):
            Phi[rows, start + c] = X[:, c]
    return Phi


def tied_candidates(net, X, patterns, eps):
    """For every (m, j) list the basic neurons within ``eps`` of the active one.

    Returns a dict ``{(m, j): array of k}`` holding only entries with at
    least two candidates.
    """
    out = {}
    for j, nr in enumerate(net.neurons):
        if nr.n_basic < 2:
            continue
        Z = nr.basic_values(X)
        best = Z[np.arange(X.shape[0]), patterns[:, j]]
        near = np.abs(Z - best[:, None]) <= eps
        for m in np.flatnonzero(near.sum(axis=1) > 1):
            out[(int(m), j)] = np.flatnonzero(near[m])
    return out


def pyramid_minmax():
    """The two-neuron MinMax network that exactly represents the unit pyramid.

    Uses ``max(0, m) = m + max(0, -m)`` with ``m`` the four-plane minimum:
    the Min neuron holds the sloped faces, the Max neuron the ground edges.
    """
    faces = [[1, 1, 0], [1, 0, 1], [1, -1, 0], [1, 0, -1]]
    convex = Neuron(MIN, faces)
    ground = Neuron(MAX, [[0, 0, 0]] + [[-a for a in w] for w in faces])
    return Network(2, [convex, ground])


def pyramid_closed_form(x1, x2):
    return np.maximum(0.0, np.minimum.reduce([x1 + 1, x2 + 1, -x1 + 1, -x2 + 1]))


def build_relu_pyramid_reference():
    """Depth-2 ReLU network that reproduces the unit pyramid exactly."""

    def relu(v):
        return np.maximum(0.0, v)

    def reference(x1, x2):
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        lower = (
            relu(-x1 - x2) + relu(x1 - x2) + relu(x1 + x2) + relu(-x1 + x2)
        )
        return relu(1.0 - 0.5 * lower)

    return reference
