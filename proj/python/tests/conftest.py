import os
import sys

_here = os.path.dirname(os.path.abspath(__file__))
_pkg_root = os.path.dirname(_here)
if _pkg_root not in sys.path:
    sys.path.insert(0, _pkg_root)
_pyd_dir = os.environ.get("MINT_PYD_DIR")
if _pyd_dir and _pyd_dir not in sys.path:
    sys.path.insert(0, _pyd_dir)
