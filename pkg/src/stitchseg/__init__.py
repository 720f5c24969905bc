"""stitchseg: training-free one-shot semantic segmentation.

Given one labeled key image and a query image, stitch them side by side,
auto-generate point prompts for a promptable segmenter, ensemble K
randomized runs, aggregate by best selection or confidence-weighted
majority voting, close small gaps morphologically, and score with IoU.
"""
from .backends import (
    BackendDescriptor,
    BackendError,
    HttpSegmenter,
    MockSegmenter,
    ProtocolError,
    SegmentationRun,
    SegmenterBackend,
    http_segment,
    mock_segment,
    segment,
)
from .ensemble import (
    CwmvParams,
    EnsembleConfig,
    EnsembleResult,
    EnsembleRunError,
    ScoreMap,
    accumulate_cwmv,
    aggregate_best,
    aggregate_cwmv,
    cwmv_threshold,
    ensemble_bundles,
    run_ensemble,
)
from .evaluation import (
    IoUReport,
    ManifestReport,
    SceneRecord,
    evaluate_manifest,
    evaluate_scene,
    iou,
    mock_backend_factory,
    read_manifest,
)
from .morphology import StructuringElement, close, dilate, erode
from .pipeline import Aggregator, PredictionConfig, ScenePrediction, predict_scene
from .prompts import (
    PointLabel,
    PointPrompt,
    PromptBundle,
    PromptConfig,
    PromptStrategy,
    build_prompts,
    sample_points,
)
from .raster import (
    BinaryMask,
    PixelCoord,
    RasterImage,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .stitching import StitchLayout, split_mask, stitch, stitch_masks

__version__ = "0.1.0"
