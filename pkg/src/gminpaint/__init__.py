"""Image inpainting by belief propagation with Gaussian-mixture messages."""
from .engine import EngineConfig, RunStats, run
from .gaussmix import GaussianMixture, WeightMode
from .imageio import GrayImage, InpaintMask, load_image, load_mask, save_image, save_mask
from .prior import PriorModel, default_model, learn_prior, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "EngineConfig", "RunStats", "run", "GaussianMixture", "WeightMode", "GrayImage", "InpaintMask",
    "load_image", "load_mask", "save_image", "save_mask", "PriorModel", "default_model", "learn_prior",
    "load_model", "save_model",
]
