from .checkpoint import (
    Checkpoint,
    encoder_from_checkpoint,
    export_encoder,
    import_encoder,
    load_state_strict,
    model_from_checkpoint,
    state_digest,
)
from .decoders import ClsDecoder, MaskDCPTModel, ReconDecoder, RestorationHead, RestorationModel
from .encoder import Encoder, EncoderConfig, FeaturePyramid, Topology, tap_indices
from .layers import MaskedConv2d, downsample_kept, masked_conv2d

__all__ = [
    "Checkpoint", "encoder_from_checkpoint", "export_encoder", "import_encoder", "load_state_strict",
    "model_from_checkpoint", "state_digest", "ClsDecoder", "MaskDCPTModel", "ReconDecoder",
    "RestorationHead", "RestorationModel", "Encoder", "EncoderConfig", "FeaturePyramid", "Topology",
    "tap_indices", "MaskedConv2d", "downsample_kept", "masked_conv2d",
]
