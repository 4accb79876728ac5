"""Adaptive-resolution/bit-depth video coding wrapper.

Down-samples spatial resolution and effective bit depth before a host
encoder, restores them after decoding (residual CNN or filter baseline),
and ships the RD evaluation stack to compare against the plain host.
"""

from .errors import AdapterError, ConfigError, FormatError, VidadaptError
from .video_io import (ChromaFormat, Frame, VideoSequence, read_raw_video,
                       write_raw_video, to_rgb, from_rgb, plan_blocks,
                       extract_blocks, aggregate_blocks)
from .resampler import (lanczos3_downsample_2x, lanczos3_upsample_2x,
                        nearest_upsample_2x, ebd_downshift, ebd_upshift)
from .cnn import (AdaptVersion, ModelKey, ModelWeights, NetworkSpec,
                  conv2d, prelu, network_forward, select_model,
                  reconstruct_frame, load_weights, save_weights, zero_model)
from .qro import (MlpModel, QroFeatures, temporal_information, srqm_score,
                  mlp_forward, decide_sr, gop_features, load_mlp, save_mlp)
from .pipeline import (AdaptationMode, CodecAdapter, SegmentHeader,
                       apply_qp_offset, segment_sequence, encode_video,
                       decode_video)
from .metrics import (BdKind, RdCurve, RdMetric, RdPoint, bd_metric,
                      point_above_curve, psnr_luma, vmaf_external)

__version__ = "0.1.0"
