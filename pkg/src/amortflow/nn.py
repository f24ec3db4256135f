"""Minimal parameter containers and fully connected layers."""

import numpy as np

from amortflow.numerics import Tensor, elu, linear


def glorot_uniform(stream, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return stream.generator.uniform(-limit, limit, size=shape)


class Module:
    """Holds named trainable parameters, fixed buffers and child modules.

    Names are dotted paths (``blocks.0.s1.layers.1.weight``) and iteration
    order is insertion order, so a state dict always lists tensors the same
    way for the same architecture.
    """

    def __init__(self):
        self._params = {}
        self._buffers = {}
        self._children = {}

    def add_parameter(self, name, value):
        self._params[name] = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        return self._params[name]

    def add_buffer(self, name, value):
        self._buffers[name] = np.asarray(value, dtype=np.float64)

    def add_module(self, name, module):
        self._children[name] = module
        return module

    def param(self, name):
        return self._params[name]

    def buffer(self, name):
        return self._buffers[name]

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def named_buffers(self, prefix=""):
        for name, b in self._buffers.items():
            yield prefix + name, b
        for cname, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def state_dict(self):
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        state.update({name: b.copy() for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state):
        """Replace parameter and buffer values; shapes must match exactly."""
        expected = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        missing = (set(expected) | set(buffers)) - set(state)
        unknown = set(state) - set(expected) - set(buffers)
        if missing or unknown:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unknown={sorted(unknown)}")
        for name, value in state.items():
            target = expected[name].data if name in expected else buffers[name]
            value = np.asarray(value, dtype=np.float64)
            if value.shape != target.shape:
                raise ValueError(f"shape mismatch for {name}: {value.shape} vs {target.shape}")
            target[...] = value

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class Dense(Module):
    def __init__(self, in_dim, out_dim, stream, zero_init=False):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        if zero_init:
            w = np.zeros((in_dim, out_dim))
        else:
            w = glorot_uniform(stream, in_dim, out_dim, (in_dim, out_dim))
        self.add_parameter("weight", w)
        self.add_parameter("bias", np.zeros(out_dim))

    def __call__(self, x):
        return linear(x, self.param("weight"), self.param("bias"))


class MLP(Module):
    """Stack of ELU hidden layers and a linear output layer."""

    def __init__(self, in_dim, hidden, out_dim, stream, zero_last=False):
        super().__init__()
        dims = [in_dim, *hidden]
        self.layers = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.layers.append(self.add_module(f"layers.{i}", Dense(a, b, stream)))
        self.output = self.add_module(
            "output", Dense(dims[-1], out_dim, stream, zero_init=zero_last)
        )

    def __call__(self, x):
        for layer in self.layers:
            x = elu(layer(x))
        return self.output(x)
