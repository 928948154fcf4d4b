"""Autoencoder video anomaly detection with skip-frame temporal pseudo anomalies."""

from .dataset import Clip, ClipSpec, FrameStore, VideoMeta, load_dataset
from .evaluation import EvalReport, evaluate, roc_auc
from .model import Autoencoder, init_params
from .scoring import PsnrConfig, ScoreSeries, psnr, score_video
from .synthbench import BenchConfig, build_benchmark
from .synthesizer import SynthConfig, select_input
from .training import TrainConfig, train

__all__ = [
    "Autoencoder", "BenchConfig", "Clip", "ClipSpec", "EvalReport", "FrameStore", "PsnrConfig",
    "ScoreSeries", "SynthConfig", "TrainConfig", "VideoMeta", "build_benchmark", "evaluate", "init_params",
    "load_dataset", "psnr", "roc_auc", "score_video", "select_input", "train",
]
