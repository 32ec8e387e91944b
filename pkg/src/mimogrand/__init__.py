"""Symbol-level GRAND for Gray-QAM massive MIMO with zero-forcing detection."""
from .binary_code import (BitWord, CodeParameterError, CosetLeaderTable, SystematicCode,
                          build_coset_leader_table, encode, encode_many, generate_rlc, is_codeword,
                          ml_decode_oracle, syndrome)
from .error_model import (ErrorStructure, StructureRanking, SymbolErrorProbs, bitlevel_query_upper_bound,
                          candidate_structures, ebn0_to_snr, lookup_memory_bits, q_function, rank_structures,
                          ranking_tables, structure_bits, structure_probability,
                          structure_probability_closed, symbol_error_probs, tables_needed)
from .grand_decoders import (DECODERS, DecodeOutcome, SortPermutation, antenna_sort, bit_level_grand,
                             pattern_count_for_structure, sorted_bit_level_grand,
                             sorted_symbol_level_grand, symbol_level_grand)
from .mimo_channel import (ChannelRealization, SingularChannelError, ZfDetector, orthogonality_defect,
                           pch_transmit, post_processing_gains, real_lattice_basis, sample_channel,
                           transmit, zf_detect)
from .modulation import (Constellation, PointClass, build_gray_qam, classify_point, demap, error_strings,
                         map_bits, neighborhoods, quantize)
from .sim_harness import (CampaignResult, SimConfig, run_campaign, run_od_study, run_structure_census,
                          run_trial)

__version__ = "0.1.0"
