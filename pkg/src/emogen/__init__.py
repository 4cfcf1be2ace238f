"""emogen: from-scratch CNN engine and real-time pipeline for emotion and
gender classification from face images."""

from .data import (EMOTIONS, GENDERS, Dataset, EmotionLabel, FerSample,
                   GenderManifestRow, decode_image, load_fer_csv,
                   load_gender_manifest, preprocess, resize_bilinear)
from .detect import (CascadeModel, Detection, detect_faces, group_boxes,
                     integral_image, load_cascade)
from .layers import SeparableConvSpec, multiply_count
from .metrics import EvalReport, evaluate
from .models import (Model, build_emotion_ensemble, build_gender_model,
                     build_mini_xception, build_simple_cnn4, ensemble_average,
                     predict_emotion, predict_gender)
from .network import Network
from .optim import AdamState, TrainConfig, adam_step, cross_entropy
from .pipeline import FrameResult, bench, process_frame
from .tensor import Tensor, create, elementwise_add, matmul, pad_nchw, scale
from .train import grad_check, train_epochs
from .weights import load_archive, load_model, save_archive, save_model

__version__ = "0.1.0"
