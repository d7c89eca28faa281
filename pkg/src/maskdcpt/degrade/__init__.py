from .corpus import (
    Corpus,
    CorpusEntry,
    CorpusManifest,
    CorpusView,
    build_corpus,
    load_corpus,
    read_image,
    write_image,
)
from .ops import (
    DEFAULT_PARAM_RANGES,
    NUM_FAMILIES,
    DegradationSpec,
    Family,
    PairedSample,
    apply_gaussian_noise,
    apply_haze,
    apply_low_light,
    apply_motion_blur,
    apply_rain_streaks,
    motion_kernel,
    rain_layer,
)
from .textures import procedural_texture, write_procedural_dir

__all__ = [
    "Corpus", "CorpusEntry", "CorpusManifest", "CorpusView", "build_corpus", "load_corpus",
    "read_image", "write_image", "DEFAULT_PARAM_RANGES", "NUM_FAMILIES", "DegradationSpec",
    "Family", "PairedSample", "apply_gaussian_noise", "apply_haze", "apply_low_light",
    "apply_motion_blur", "apply_rain_streaks", "motion_kernel", "rain_layer",
    "procedural_texture", "write_procedural_dir",
]
