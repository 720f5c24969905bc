"""HTTP reference server exposing a promptable-segmenter checkpoint."""
from .app import create_app
from .predictor import Predictor, SamCheckpointPredictor, mask_to_low_res_logits

__version__ = "0.1.0"
