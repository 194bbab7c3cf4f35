"""PDC-Net: strip-convolution segmentation network on a small numpy autodiff engine."""

from .network import EncoderConfig, PdcNet, PdcNetConfig, load_model, save_model

__version__ = "0.1.0"

__all__ = ["EncoderConfig", "PdcNet", "PdcNetConfig", "load_model", "save_model", "__version__"]
