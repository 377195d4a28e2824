"""gazeloop: human-in-the-loop object recognition for eye-tracking video.

Synthetic scenes feed a detector stand-in; per-frame graphs over the
detections are classified by an inductive message-passing network; a
memory-based propagation engine turns sparse user annotations into training
data; a session engine closes the loop and reports detection, classification,
and fixation-mapping metrics per feedback round.
"""

from .scene import (BACKGROUND, BoundingBox, FixationPoint, Frame, GtObject,
                    MotionSpec, ObjectSpec, SceneConfig, SceneDataset,
                    generate_scene, load_dataset, save_dataset, simulate_gaze)
from .proposals import (DetectionRecord, DetectorConfig, DetectorSchedule,
                        detect_dataset, detect_regions, load_detections,
                        save_detections)
from .graphs import FrameGraph, build_frame_graph, node_feature
from .network import (InductiveGraphModel, LocalFeatureBaseline, PredictionSet,
                      TrainConfig, TransductiveGcn, UnsupportedGraphSizeError,
                      fit, forward, gcn_forward, load_model, predict_unseen,
                      save_model)
from .metrics import (MetricsReport, average_precision, balanced_accuracy,
                      fixation_to_aoi, iou, mean_ap)
from .propagation import (AnnotatedRegion, MemoryEntry, PropagationParams,
                          TrackMemory, assign_labels, memory_read,
                          memory_write, propagate_annotations)
from .hil import (HilConfig, HilEngine, OracleUser, ScriptedUser, SessionReport,
                  UserAgent, count_user_actions, evaluate_model,
                  interactive_annotation, run_cml_baseline, run_hil_session)

__version__ = "0.1.0"
