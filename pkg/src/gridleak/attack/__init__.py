"""Offline and active stages of the property-inference attack."""
from .meta import (MetaClassifier, infer_property, load_meta, run_attack,
                   save_meta, train_meta)
from .shadows import derive_seed, train_shadow_farm
from .signatures import (ModelSignature, SignatureSet, SignatureSpec,
                         gen_signature, gen_signature_set,
                         load_signature_manifest, load_signature_set,
                         sample_signature_dates, save_signature_manifest,
                         save_signature_set, signature_trajectory)

__all__ = [
    "SignatureSpec", "ModelSignature", "SignatureSet",
    "gen_signature", "gen_signature_set", "signature_trajectory",
    "sample_signature_dates",
    "save_signature_set", "load_signature_set",
    "save_signature_manifest", "load_signature_manifest",
    "train_shadow_farm", "derive_seed",
    "MetaClassifier", "train_meta", "infer_property", "run_attack",
    "save_meta", "load_meta",
]
