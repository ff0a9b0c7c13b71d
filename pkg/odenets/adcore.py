"""
Aritmética de tensores densos con diferenciación automática en modo reverso

Cada operación sobre tensores que requieren gradiente se registra en la cinta
activa; value_and_grad recorre la cinta en orden inverso.
"""

import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import conf
from .exceptions import ContractError, NumericError, ShapeError

ArrayLike = Union[np.ndarray, float, int, Sequence]

_local = threading.local()


def _active_tape() -> Optional['Tape']:
    stack = getattr(_local, 'tapes', None)
    return stack[-1] if stack else None


class Tape:
    """Cinta de operaciones confinada al hilo que la activa"""

    def __init__(self):
        self.nodes = []

    def __enter__(self) -> 'Tape':
        if not hasattr(_local, 'tapes'):
            _local.tapes = []
        _local.tapes.append(self)
        return self

    def __exit__(self, *exc):
        _local.tapes.pop()
        return False

    def record(self, node: 'Tensor'):
        self.nodes.append(node)

    def backward(self, output: 'Tensor'):
        """Propagar el gradiente desde la salida escalar"""
        output.grad = np.ones_like(output.data)
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


class Tensor:
    """Tensor denso de float64 con gradiente opcional"""

    __slots__ = ('data', 'grad', 'requires_grad', 'name', '_parents', '_backward')

    # Que numpy delegue en los operadores reflejados del tensor
    __array_ufunc__ = None

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def accumulate(self, grad: np.ndarray):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def value_of(value) -> np.ndarray:
    """Obtener el arreglo numérico de un tensor o arreglo"""
    return value.data if isinstance(value, Tensor) else np.asarray(value, dtype=np.float64)


def _make(data: np.ndarray, parents: Tuple[Tensor, ...], backward: Callable[[np.ndarray], None], op: str) -> Tensor:
    if conf.checked_math() and not np.all(np.isfinite(data)):
        raise NumericError(f"Valores no finitos en la salida de '{op}'")

    out = Tensor(data)
    if any(parent.requires_grad for parent in parents):
        tape = _active_tape()
        if tape is not None:
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            tape.record(out)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sumar el gradiente sobre los ejes que se difundieron"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(a.shape, b.shape, op)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def backward(grad):
        a.accumulate(_unbroadcast(grad, a.shape))
        b.accumulate(_unbroadcast(grad, b.shape))
    return _make(a.data + b.data, (a, b), backward, 'add')


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def backward(grad):
        a.accumulate(_unbroadcast(grad, a.shape))
        b.accumulate(_unbroadcast(-grad, b.shape))
    return _make(a.data - b.data, (a, b), backward, 'sub')


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def backward(grad):
        a.accumulate(_unbroadcast(grad * b.data, a.shape))
        b.accumulate(_unbroadcast(grad * a.data, b.shape))
    return _make(a.data * b.data, (a, b), backward, 'mul')


def matmul(a, b) -> Tensor:
    """Producto matricial de dos tensores 2-D"""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(a.shape, b.shape, 'matmul')

    def backward(grad):
        a.accumulate(grad @ b.data.T)
        b.accumulate(a.data.T @ grad)
    return _make(a.data @ b.data, (a, b), backward, 'matmul')


def relu(x) -> Tensor:
    """ReLU; la derivada en 0 es 0"""
    x = as_tensor(x)
    mask = x.data > 0

    def backward(grad):
        x.accumulate(grad * mask)
    return _make(np.where(mask, x.data, 0.0), (x,), backward, 'relu')


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(x.shape, tuple(shape), 'reshape')

    def backward(grad):
        x.accumulate(grad.reshape(x.shape))
    return _make(data, (x,), backward, 'reshape')


def linear_combination(weights: ArrayLike, coeffs) -> Tensor:
    """
    Combinar las filas de coeffs (K x P) con pesos constantes de longitud K

    Evalúa sum_k weights[k] * coeffs[k, :].
    """
    weights = np.asarray(weights, dtype=np.float64)
    coeffs = as_tensor(coeffs)
    if coeffs.data.ndim != 2 or weights.shape != (coeffs.shape[0],):
        raise ShapeError(weights.shape, coeffs.shape, 'linear_combination')

    def backward(grad):
        coeffs.accumulate(np.outer(weights, grad))
    return _make(weights @ coeffs.data, (coeffs,), backward, 'linear_combination')


def batch_mean(x) -> Tensor:
    """Media por característica sobre el eje del lote, sumando de izquierda a derecha"""
    x = as_tensor(x)
    n = x.shape[0]
    # cumsum acumula secuencialmente, el orden de suma es fijo
    total = np.cumsum(x.data, axis=0)[-1]

    def backward(grad):
        x.accumulate(np.broadcast_to(grad / n, x.shape))
    return _make(total / n, (x,), backward, 'batch_mean')


def batch_variance(x) -> Tensor:
    """Varianza sesgada (1/N) por característica"""
    centered = sub(x, batch_mean(x))
    return batch_mean(mul(centered, centered))


def rsqrt(x, eps: float = 0.0) -> Tensor:
    """1 / sqrt(x + eps)"""
    x = as_tensor(x)
    value = 1.0 / np.sqrt(x.data + eps)

    def backward(grad):
        x.accumulate(-0.5 * grad * value ** 3)
    return _make(value, (x,), backward, 'rsqrt')


def batch_norm(x, mean, var, scale, bias, eps: float) -> Tensor:
    """Normalización afín (x - mu) / sqrt(var + eps) * s + b"""
    return add(mul(mul(sub(x, mean), rsqrt(var, eps)), scale), bias)


def dense(x, kernel, bias) -> Tensor:
    return add(matmul(x, kernel), bias)


def total(x) -> Tensor:
    """Suma de todos los elementos"""
    x = as_tensor(x)

    def backward(grad):
        x.accumulate(np.broadcast_to(grad, x.shape))
    return _make(np.asarray(x.data.sum()), (x,), backward, 'total')


def softmax_cross_entropy(logits, labels: ArrayLike) -> Tensor:
    """Entropía cruzada con etiquetas enteras, promediada sobre el lote"""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(logits.shape, labels.shape, 'softmax_cross_entropy')
    if np.any(labels < 0) or np.any(labels >= logits.shape[1]):
        raise ShapeError(logits.shape, (int(labels.max()) + 1,), 'etiquetas fuera de rango')

    n = logits.shape[0]
    rows = np.arange(n)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = np.mean(log_norm - shifted[rows, labels])

    def backward(grad):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, labels] -= 1.0
        logits.accumulate(grad * probs / n)
    return _make(np.asarray(loss), (logits,), backward, 'softmax_cross_entropy')


class ParamStore:
    """
    Almacenamiento ordenado de parámetros entrenables por nombre

    Los nombres son rutas únicas ("block0/unit/dense1/kernel"); el orden de
    iteración es el de inserción.
    """

    def __init__(self, items: Iterable[Tuple[str, ArrayLike]] = ()):
        self._items = OrderedDict()
        for name, value in items:
            if name in self._items:
                raise ContractError(f"Nombre de parámetro duplicado: {name}")
            self._items[name] = np.array(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._items[name]

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def __iter__(self) -> Iterator[str]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._items)

    def items(self):
        return self._items.items()

    def copy(self) -> 'ParamStore':
        return ParamStore((name, value.copy()) for name, value in self._items.items())

    def zeros_like(self) -> 'ParamStore':
        return ParamStore((name, np.zeros_like(value)) for name, value in self._items.items())

    def size(self) -> int:
        return int(sum(value.size for value in self._items.values()))

    def to_dict(self) -> Dict[str, np.ndarray]:
        return dict(self._items)


def value_and_grad(fn: Callable[[Mapping[str, Tensor]], Tensor], params: ParamStore) -> Tuple[float, ParamStore]:
    """
    Evaluar fn(params) y su gradiente respecto a cada tensor de params

    Returns:
        (valor escalar, ParamStore de gradientes con las mismas formas)
    """
    with Tape() as tape:
        leaves = OrderedDict(
            (name, Tensor(value, requires_grad=True, name=name)) for name, value in params.items()
        )
        output = fn(leaves)

    if not isinstance(output, Tensor) or output.data.size != 1:
        shape = output.shape if isinstance(output, Tensor) else type(output).__name__
        raise ContractError(f"value_and_grad requiere una función escalar, se obtuvo {shape}")

    if output.requires_grad:
        tape.backward(output)

    grads = ParamStore(
        (name, leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
        for name, leaf in leaves.items()
    )
    return float(output.data), grads


@dataclass
class FiniteDiffReport:
    """Comparación del gradiente reverso contra diferencias centrales"""
    per_param: Dict[str, float]
    max_error: float


# Piso del denominador del error relativo
RELATIVE_FLOOR = 1e-4


def finite_diff_check(fn: Callable[[Mapping[str, Tensor]], Tensor], params: ParamStore, step: float = 1e-5) -> FiniteDiffReport:
    """
    Comparar value_and_grad contra diferencias centrales de paso step

    El error por entrada es |a - n| / max(|a|, |n|, RELATIVE_FLOOR).
    """
    if step <= 0:
        raise ContractError("El paso de diferencias finitas debe ser positivo")

    _, analytic = value_and_grad(fn, params)

    def evaluate(values: Dict[str, np.ndarray]) -> float:
        return float(value_of(fn({name: Tensor(value) for name, value in values.items()})))

    per_param = {}
    for name, value in params.items():
        values = {key: val.copy() for key, val in params.items()}
        numeric = np.zeros_like(value)
        flat = values[name].reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + step
            upper = evaluate(values)
            flat[index] = original - step
            lower = evaluate(values)
            flat[index] = original
            numeric.reshape(-1)[index] = (upper - lower) / (2.0 * step)

        exact = analytic[name]
        denominator = np.maximum(np.maximum(np.abs(exact), np.abs(numeric)), RELATIVE_FLOOR)
        errors = np.abs(exact - numeric) / denominator
        per_param[name] = float(errors.max()) if errors.size else 0.0

    return FiniteDiffReport(per_param=per_param, max_error=max(per_param.values(), default=0.0))
