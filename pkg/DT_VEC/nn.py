import os
from dataclasses import dataclass, field
import numpy as np
from scipy.special import softmax

ACTIVATIONS = ['relu', 'tanh', 'linear', 'softmax']
HEADS = [None, 'softmax']

ACTOR_HIDDEN = [300, 100]
CRITIC_HIDDEN = [300, 100]


@dataclass
class Mlp:
    """
    Dense feed-forward network. Layer l maps `layer_dims[l]` inputs to `layer_dims[l+1]` outputs via
    `weights[l]` (shape out x in), `biases[l]` and the activation `activations[l]`. The output of the last
    layer is multiplied by `scale` and, if `head` is 'softmax', normalized to a probability vector.

    `version` is incremented by every in-place parameter change and is used to detect stale caches.
    """
    layer_dims: list
    weights: list
    biases: list
    activations: list
    scale: float = 1.0
    head: str = None
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.layer_dims = [int(d) for d in self.layer_dims]
        n_layers = len(self.layer_dims) - 1
        if n_layers < 1:
            raise ValueError('a network needs at least one layer; got layer_dims {}'.format(self.layer_dims))
        if not len(self.weights) == len(self.biases) == len(self.activations) == n_layers:
            raise ValueError('expected {} weight matrices, bias vectors and activation tags'.format(n_layers))
        for l in range(n_layers):
            shape = (self.layer_dims[l + 1], self.layer_dims[l])
            if np.shape(self.weights[l]) != shape:
                raise ValueError('weights[{}]: expected shape {}; got {}'.format(l, shape, np.shape(self.weights[l])))
            if np.shape(self.biases[l]) != (shape[0],):
                raise ValueError('biases[{}]: expected shape {}; got {}'.format(l, (shape[0],),
                                                                                np.shape(self.biases[l])))
            if self.activations[l] not in ACTIVATIONS:
                raise ValueError("activation '{}' is not supported; should be one of {}"
                                 .format(self.activations[l], ACTIVATIONS))
        if 'softmax' in self.activations[:-1]:
            raise ValueError('softmax may only be used as the activation of the final layer')
        if self.head not in HEADS:
            raise ValueError("head '{}' is not supported; should be one of {}".format(self.head, HEADS))
        if self.head == 'softmax' and self.activations[-1] == 'softmax':
            raise ValueError('a softmax layer cannot be followed by a softmax head')
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        self.scale = float(self.scale)

    @property
    def n_layers(self):
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, Mlp):
            return NotImplemented
        return (same_topology(self, other)
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


@dataclass
class GradientSet:
    """Gradients of a scalar loss with respect to the parameters of an Mlp (same shapes)."""
    weights: list
    biases: list

    @classmethod
    def zeros_like(cls, net):
        return cls(weights=[np.zeros_like(w) for w in net.weights], biases=[np.zeros_like(b) for b in net.biases])


def parameter_count(net):
    return sum(w.size + b.size for w, b in zip(net.weights, net.biases))


def same_topology(a, b):
    return (a.layer_dims == b.layer_dims and list(a.activations) == list(b.activations)
            and a.scale == b.scale and a.head == b.head)


def copy_mlp(net):
    """Independent copy of a network (parameters are copied, the version counter restarts)."""
    return Mlp(layer_dims=list(net.layer_dims), weights=[w.copy() for w in net.weights],
               biases=[b.copy() for b in net.biases], activations=list(net.activations),
               scale=net.scale, head=net.head)


def build_mlp(layer_dims, activations, rng, scale=1.0, head=None):
    """
    Builds a network with parameters drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Parameters
    ----------
    layer_dims: list[int]
    activations: list[str]
        One tag per layer.
    rng: numpy.random.Generator
    scale: float, optional
        Output multiplier.
    head: str or None, optional
        'softmax' to normalize the scaled output.

    Returns
    -------
    Mlp
    """
    if any(d < 1 for d in layer_dims):
        raise ValueError('layer dimensions must be >= 1; got {}'.format(layer_dims))
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = 1 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Mlp(layer_dims=list(layer_dims), weights=weights, biases=biases, activations=list(activations),
               scale=scale, head=head)


def build_actor(state_dim, action_count, rng, logit_scale=10.0):
    """Policy network state_dim -> 300 (relu) -> 100 (relu) -> action_count (tanh) -> softmax."""
    return build_mlp([state_dim] + ACTOR_HIDDEN + [action_count], ['relu', 'relu', 'tanh'], rng,
                     scale=logit_scale, head='softmax')


def build_critic(joint_dim, rng, q_scale=20.0):
    """Value network joint_dim -> 300 (relu) -> 100 (relu) -> 1 (tanh), output multiplied by `q_scale`."""
    return build_mlp([joint_dim] + CRITIC_HIDDEN + [1], ['relu', 'relu', 'tanh'], rng, scale=q_scale)


def _activate(tag, z):
    if tag == 'relu':
        return np.maximum(z, 0.0)
    elif tag == 'tanh':
        return np.tanh(z)
    elif tag == 'linear':
        return z
    else:
        return softmax(z, axis=1)


def _softmax_backward(p, g):
    return p * (g - np.sum(g * p, axis=1, keepdims=True))


def forward(net, x):
    """
    Forward pass.

    Parameters
    ----------
    net: Mlp
    x: numpy.ndarray
        A single input vector of length `layer_dims[0]` or a batch with one input per row.

    Returns
    -------
    output: numpy.ndarray
        Same dimensionality as `x` (vector or one row per input).
    cache: dict
        Layer inputs, pre-activations and outputs required by :func:`backward`.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x.reshape(1, -1) if single else x
    if a.ndim != 2 or a.shape[1] != net.layer_dims[0]:
        raise ValueError('input dimension mismatch: network expects {} features; got shape {}'
                         .format(net.layer_dims[0], x.shape))
    inputs = []
    pre = []
    post = []
    for w, b, tag in zip(net.weights, net.biases, net.activations):
        inputs.append(a)
        z = a @ w.T + b
        a = _activate(tag, z)
        pre.append(z)
        post.append(a)
    out = a * net.scale
    if net.head == 'softmax':
        out = softmax(out, axis=1)
    cache = {'net': id(net), 'version': net.version, 'single': single,
             'inputs': inputs, 'pre': pre, 'post': post, 'output': out}
    return (out[0] if single else out), cache


def backward(net, cache, upstream_grad):
    """
    Backpropagates the gradient of a scalar loss with respect to the network output. For batched input the
    per-sample gradients are summed.

    Parameters
    ----------
    net: Mlp
    cache: dict
        As returned by :func:`forward` on the same network with unchanged parameters.
    upstream_grad: numpy.ndarray
        dLoss/dOutput, same shape as the output of the forward call.

    Returns
    -------
    GradientSet
    """
    if cache['net'] != id(net) or cache['version'] != net.version:
        raise RuntimeError('stale cache: the network parameters changed after the forward pass')
    g = np.asarray(upstream_grad, dtype=np.float64)
    g = g.reshape(1, -1) if cache['single'] else g
    if g.shape != cache['output'].shape:
        raise ValueError('upstream gradient shape {} does not match output shape {}'
                         .format(g.shape, cache['output'].shape))
    if net.head == 'softmax':
        g = _softmax_backward(cache['output'], g)
    g = g * net.scale

    grad_w = [None] * net.n_layers
    grad_b = [None] * net.n_layers
    for l in reversed(range(net.n_layers)):
        tag = net.activations[l]
        if tag == 'relu':
            g = g * (cache['pre'][l] > 0)
        elif tag == 'tanh':
            g = g * (1 - cache['post'][l] ** 2)
        elif tag == 'softmax':
            g = _softmax_backward(cache['post'][l], g)
        grad_w[l] = g.T @ cache['inputs'][l]
        grad_b[l] = g.sum(axis=0)
        if l > 0:
            g = g @ net.weights[l]
    return GradientSet(weights=grad_w, biases=grad_b)


def _check_congruent(net, grads):
    for l in range(net.n_layers):
        if grads.weights[l].shape != net.weights[l].shape or grads.biases[l].shape != net.biases[l].shape:
            raise ValueError('gradient shapes do not match layer {} of the network'.format(l))


def sgd_step(net, grads, lr):
    """Plain gradient descent theta <- theta - lr * grad, in place. Returns `net`."""
    _check_congruent(net, grads)
    for l in range(net.n_layers):
        net.weights[l] -= lr * grads.weights[l]
        net.biases[l] -= lr * grads.biases[l]
    net.version += 1
    return net


@dataclass
class AdamState:
    """First and second moment estimates of one network."""
    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_net(cls, net):
        zeros = GradientSet.zeros_like
        m, v = zeros(net), zeros(net)
        return cls(m_weights=m.weights, m_biases=m.biases, v_weights=v.weights, v_biases=v.biases)


def adam_step(net, grads, lr, state):
    """Adam update with bias-corrected moments, in place. Returns `net`."""
    _check_congruent(net, grads)
    state.t += 1
    c1 = 1 - state.beta1 ** state.t
    c2 = 1 - state.beta2 ** state.t
    for params, g_list, m_list, v_list in [(net.weights, grads.weights, state.m_weights, state.v_weights),
                                           (net.biases, grads.biases, state.m_biases, state.v_biases)]:
        for l in range(net.n_layers):
            m_list[l] = state.beta1 * m_list[l] + (1 - state.beta1) * g_list[l]
            v_list[l] = state.beta2 * v_list[l] + (1 - state.beta2) * g_list[l] ** 2
            params[l] -= lr * (m_list[l] / c1) / (np.sqrt(v_list[l] / c2) + state.epsilon)
    net.version += 1
    return net


class Optimizer:
    """
    Binds a network, an update rule ('sgd' or 'adam') and a learning rate.

    Parameters
    ----------
    net: Mlp
    kind: str
    lr: float
    """
    def __init__(self, net, kind, lr):
        if kind not in ['sgd', 'adam']:
            raise ValueError("optimizer '{}' is not supported".format(kind))
        self.net = net
        self.kind = kind
        self.lr = lr
        self.state = AdamState.for_net(net) if kind == 'adam' else None

    def step(self, grads):
        if self.kind == 'sgd':
            return sgd_step(self.net, grads, self.lr)
        return adam_step(self.net, grads, self.lr, self.state)


def soft_update(target, source, eta):
    """
    Moves the target parameters towards the source: theta' <- eta * theta + (1 - eta) * theta', in place.
    Parameters that already agree are left bit-identical. Returns `target`.
    """
    if not same_topology(target, source):
        raise ValueError('soft update requires identical topologies; got {} {} and {} {}'
                         .format(target.layer_dims, target.activations, source.layer_dims, source.activations))
    if not 0 <= eta <= 1:
        raise ValueError('eta must lie in [0, 1]; got {}'.format(eta))
    for tgt, src in [(target.weights, source.weights), (target.biases, source.biases)]:
        for l in range(target.n_layers):
            if eta == 1:
                tgt[l][...] = src[l]
            elif eta > 0:
                tgt[l] += eta * (src[l] - tgt[l])
    target.version += 1
    return target


def save(net, filename):
    """
    Writes a network as text: a topology header (`layer_dims`, `activations`, `scale`, `head`) followed by
    `[weights l]` and `[biases l]` blocks, values printed with 17 significant digits.
    """
    os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
    with open(filename, 'w') as f:
        f.write('layer_dims {}\n'.format(' '.join(str(d) for d in net.layer_dims)))
        f.write('activations {}\n'.format(' '.join(net.activations)))
        f.write('scale {!r}\n'.format(net.scale))
        f.write('head {}\n'.format(net.head if net.head is not None else 'none'))
        for l in range(net.n_layers):
            f.write('[weights {}]\n'.format(l))
            np.savetxt(f, net.weights[l], fmt='%.17g')
            f.write('[biases {}]\n'.format(l))
            np.savetxt(f, net.biases[l].reshape(1, -1), fmt='%.17g')
    return filename


def load(filename):
    """Reads a network written by :func:`save`."""
    with open(filename, 'r') as f:
        lines = [line.strip() for line in f if line.strip() != '']
    header = {}
    for line in lines[:4]:
        key, _, value = line.partition(' ')
        header[key] = value
    for key in ['layer_dims', 'activations', 'scale', 'head']:
        if key not in header:
            raise ValueError("network file {}: header line '{}' is missing".format(filename, key))
    layer_dims = [int(d) for d in header['layer_dims'].split()]
    activations = header['activations'].split()
    for tag in activations:
        if tag not in ACTIVATIONS:
            raise RuntimeError("network file {}: unknown activation tag '{}'".format(filename, tag))
    head = None if header['head'] == 'none' else header['head']

    blocks = {}
    current = None
    for line in lines[4:]:
        if line.startswith('['):
            current = line.strip('[]')
            blocks[current] = []
        elif current is None:
            raise ValueError('network file {}: values outside of a block'.format(filename))
        else:
            blocks[current].append([float(v) for v in line.split()])
    weights = []
    biases = []
    for l in range(len(layer_dims) - 1):
        try:
            weights.append(np.array(blocks['weights {}'.format(l)], dtype=np.float64)
                           .reshape(layer_dims[l + 1], layer_dims[l]))
            biases.append(np.array(blocks['biases {}'.format(l)], dtype=np.float64).reshape(layer_dims[l + 1]))
        except (KeyError, ValueError) as e:
            raise ValueError('network file {}: parameters of layer {} do not match the header'
                             .format(filename, l)) from e
    return Mlp(layer_dims=layer_dims, weights=weights, biases=biases, activations=activations,
               scale=float(header['scale']), head=head)
