"""Sparse-recovery sketches for the universal relation, turnstile support
finding and l0-sampling, together with the encoders, reductions and exact
checks behind their space lower bounds."""

from .errors import (ConstructionFailure, DecodeFailure, DimensionError, DomainError,
                     FormatError, HypothesisError, ParameterError, ProtocolFailure)
from .recovery import Backend, RecoveryScheme, TritVector, build_scheme, encode_syndrome, recover
from .protocol import (ProtocolParams, UniformURProtocol, UrMessage, URProtocol, alice_encode,
                       bob_decode, deserialize, message_bits, serialize, wrap_uniform)
from .sketch import (Sketch, StreamUpdate, merge, query_l0_sample, query_support_find,
                     ur_from_findup, ur_from_streaming, update)
from .codec import CodecKParams, CodecOutput, CodecParams, dec, dec_k, enc, enc_k, measure_cost
from .codes import CodeFamily, build_family, decode_half, index_to_set, set_to_index
from .augindex import (AugIndexInstance, AugIndexParams, charlie_encode, diane_decode_adaptive,
                       diane_decode_oneshot, make_universe, uniformity_probe)
from .infocheck import (JointDistribution, PredicateTable, binary_entropy, check_adaptivity_bound,
                        check_bits_saving, check_pochhammer, mutual_information)

__version__ = "0.1.0"
