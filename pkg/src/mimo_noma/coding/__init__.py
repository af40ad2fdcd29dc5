"""Repetition-aided IRA codes: ensembles, graphs, BP decoding, EXIT analysis."""
from .ensemble import CodeEnsemble, Profile, ProfileError, BUILTIN_PROFILES, load_profile
from .graph import CodeGraph, Interleaver, build_code, encode
from .decoder import DecoderState, app_decode
from .exit import find_threshold, exit_trajectory

__all__ = ["CodeEnsemble", "Profile", "ProfileError", "BUILTIN_PROFILES", "load_profile", "CodeGraph",
           "Interleaver", "build_code", "encode", "DecoderState", "app_decode", "find_threshold",
           "exit_trajectory"]
