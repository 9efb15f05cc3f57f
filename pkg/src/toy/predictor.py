"""
可微分的小型分类器
线性（softmax 回归）与 MLP，权重存放在带层偏移的扁平向量中
"""
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from src.core.errors import DimensionError
from src.core.models import Activation, Architecture


def layer_shapes(architecture: Architecture, dim: int, num_classes: int) -> List[Tuple[int, int]]:
    """每层 (fan_in, fan_out)"""
    sizes = [dim, *architecture.hidden_sizes, num_classes]
    return list(zip(sizes[:-1], sizes[1:]))


def parameter_count(architecture: Architecture, dim: int, num_classes: int) -> int:
    return sum(fan_in * fan_out + fan_out for fan_in, fan_out in layer_shapes(architecture, dim, num_classes))


class Predictor:
    """分类器 M: X -> O，训练后不可变"""

    def __init__(self, model_id: str, architecture: Architecture, weights: np.ndarray,
                 num_classes: int, dim: int):
        self.model_id = model_id
        self.architecture = architecture
        self.num_classes = num_classes
        self.dim = dim

        weights = np.array(weights, dtype=np.float64).ravel()
        expected = parameter_count(architecture, dim, num_classes)
        if weights.size != expected:
            raise DimensionError(f"权重数量 {weights.size} 与结构 {architecture.describe()} 需要的 {expected} 不符")
        weights.setflags(write=False)
        self.weights = weights

        # 层偏移: (W 起点, b 起点, fan_in, fan_out)
        self.offsets: List[Tuple[int, int, int, int]] = []
        cursor = 0
        for fan_in, fan_out in layer_shapes(architecture, dim, num_classes):
            self.offsets.append((cursor, cursor + fan_in * fan_out, fan_in, fan_out))
            cursor += fan_in * fan_out + fan_out

    def layers(self, weights: Optional[np.ndarray] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
        """按层切出 (W, b) 视图"""
        flat = self.weights if weights is None else weights
        result = []
        for w_start, b_start, fan_in, fan_out in self.offsets:
            W = flat[w_start:b_start].reshape(fan_in, fan_out)
            b = flat[b_start:b_start + fan_out]
            result.append((W, b))
        return result

    def _activate(self, z: np.ndarray) -> np.ndarray:
        if self.architecture.activation == Activation.TANH:
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def _activate_grad(self, z: np.ndarray) -> np.ndarray:
        if self.architecture.activation == Activation.TANH:
            return 1.0 - np.tanh(z) ** 2
        # ReLU 在 0 处取次梯度 0
        return (z > 0).astype(np.float64)

    def forward_trace(self, X: np.ndarray, weights: Optional[np.ndarray] = None):
        """
        前向传播并保留中间量

        Args:
            X: 形状 (n, dim) 的输入
            weights: 可选的替代权重（训练时使用）

        Returns:
            (pre_activations, activations)，activations[0] 为输入，pre_activations[-1] 为 logits
        """
        activations = [X]
        pre_activations = []
        layers = self.layers(weights)
        h = X
        for index, (W, b) in enumerate(layers):
            z = h @ W + b
            pre_activations.append(z)
            if index < len(layers) - 1:
                h = self._activate(z)
                activations.append(h)
        return pre_activations, activations

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"输入维度 {x.shape} 与模型维度 {self.dim} 不符")
        return x

    def logits(self, x) -> np.ndarray:
        x = self._check_input(x)
        pre, _ = self.forward_trace(x[None, :])
        return pre[-1][0]

    def logits_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionError(f"输入维度 {X.shape} 与模型维度 {self.dim} 不符")
        pre, _ = self.forward_trace(X)
        return pre[-1]

    def predict(self, x) -> int:
        """argmax(logits)，并列时取最小类别编号"""
        return int(np.argmax(self.logits(x)))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits_batch(X), axis=1)

    def backward(self, X: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None,
                 want_params: bool = True):
        """
        交叉熵反向传播

        Args:
            X: 输入 (n, dim)
            y: 标签 (n,)
            weights: 可选的替代权重
            want_params: 是否计算参数梯度

        Returns:
            (平均损失, 参数梯度扁平向量或 None, 输入梯度 (n, dim))，梯度均为平均损失的梯度
        """
        n = X.shape[0]
        pre, acts = self.forward_trace(X, weights)
        logits = pre[-1]
        log_probs = log_softmax(logits, axis=1)
        loss = float(-np.mean(log_probs[np.arange(n), y]))

        delta = softmax(logits, axis=1)
        delta[np.arange(n), y] -= 1.0
        delta /= n

        layers = self.layers(weights)
        grad = np.zeros_like(self.weights) if want_params else None
        for index in range(len(layers) - 1, -1, -1):
            W, _ = layers[index]
            if want_params:
                w_start, b_start, fan_in, fan_out = self.offsets[index]
                grad[w_start:b_start] = (acts[index].T @ delta).ravel()
                grad[b_start:b_start + fan_out] = delta.sum(axis=0)
            delta = delta @ W.T
            if index > 0:
                delta = delta * self._activate_grad(pre[index - 1])
        return loss, grad, delta

    def input_gradient(self, x, target_label: int) -> np.ndarray:
        """交叉熵损失关于输入的精确梯度"""
        x = self._check_input(x)
        if not 0 <= target_label < self.num_classes:
            raise DimensionError(f"标签 {target_label} 超出类别数 {self.num_classes}")
        _, _, grad_x = self.backward(x[None, :], np.array([target_label]), want_params=False)
        return grad_x[0]

    def loss(self, x, target_label: int) -> float:
        x = self._check_input(x)
        return float(-log_softmax(self.logits(x))[target_label])

    def with_weights(self, weights: np.ndarray) -> "Predictor":
        return Predictor(self.model_id, self.architecture, weights, self.num_classes, self.dim)

    def __repr__(self) -> str:
        return f"Predictor(id={self.model_id}, arch={self.architecture.describe()}, dim={self.dim}, classes={self.num_classes})"
