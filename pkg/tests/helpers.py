"""
测试用的手工模型与数据
"""
import numpy as np

from src.core.models import Architecture, Dataset, Observation
from src.toy.predictor import Predictor


def linear_model(w, b=0.0, model_id="hand"):
    """两类线性模型：类 0 的 logit 恒为 0，类 1 的 logit 为 w·x + b"""
    w = np.asarray(w, dtype=np.float64)
    dim = w.size
    W = np.zeros((dim, 2))
    W[:, 1] = w
    weights = np.concatenate([W.ravel(), [0.0, b]])
    return Predictor(model_id, Architecture(kind="linear"), weights, num_classes=2, dim=dim)


def single_observation(features, label, observation_id="x0"):
    features = tuple(float(v) for v in features)
    return Dataset(
        observations=(Observation(id=observation_id, features=features, label=label),),
        num_classes=2,
        dim=len(features),
    )
