"""Python surface for the bridge-network audio-language pipeline.

The compiled extension `_mint` carries the real implementation; this
package re-exports it. When running from a CMake build tree (not an
installed wheel) set MINT_PYD_DIR to the directory holding the built
extension.
"""

import os
import sys

_pyd_dir = os.environ.get("MINT_PYD_DIR")
if _pyd_dir and _pyd_dir not in sys.path:
    sys.path.insert(0, _pyd_dir)

from _mint import (  # noqa: E402,F401
    answer,
    default_config_json,
    encode_ids,
    evaluate,
    make_data,
    mask_grid,
    render_clip_json,
    rouge_l,
    split_lower,
    synthetic_corpus_json,
    train_stage1,
    train_stage2,
)

__all__ = [
    "answer",
    "default_config_json",
    "encode_ids",
    "evaluate",
    "make_data",
    "mask_grid",
    "render_clip_json",
    "rouge_l",
    "split_lower",
    "synthetic_corpus_json",
    "train_stage1",
    "train_stage2",
]
