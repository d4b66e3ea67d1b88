"""Network blocks built on :mod:`strider.autodiff`."""
from .attention import (
    EncoderBlock,
    MultiHeadSelfAttention,
    TransformerEncoder,
    mhsa_forward,
    transformer_forward,
)
from .block import Block, checksum_of, uniform_init
from .layers import MLP, LayerNorm, Linear, linear_forward, mlp_forward
from .lstm import LstmCell, lstm_step
