"""chunkseg: learn sentence boundaries in masked word streams by chunking.

A minimal sequence-memory learner: states pair a binary chunk tree with the
most recently read word, actions either attach the word along the tree's
right spine or declare a sentence boundary, and two temporal-difference
rules (plain and Rescorla-Wagner Q-learning) drive learning from boundary
rewards.  Includes grammars, the episodic task loop, population experiments,
and analysis tooling (learning curves, logistic fits, grammar extraction,
parse-frequency tallies).
"""

from .grammar import (BUILTIN_GRAMMARS, GrammarError, Pcfg, ProductionRule,
                      SentenceSample, StreamCursor, Word, WordClass,
                      builtin_complexnp, builtin_grammar, builtin_md, builtin_nvn,
                      builtin_relclause, enumerate_structures, load_grammar_file,
                      max_sentence_length, sample_sentence, validate_pcfg)
from .chunking import (Chunk, State, apply_chunk_action, canonical_key, leaf, node,
                       parse_pattern, pattern_instance_total, pattern_leaves,
                       pattern_right_depth, right_depth, structure_pattern, substate)
from .agent import (Agent, AgentConfig, EpisodeTrace, QTable, composite_add,
                    composite_avg, composite_profile, policy_probs, select_action,
                    update_episode)
from .environment import (DEFAULT_GUARD_LIMIT, EpisodeRecord, SimulationState,
                          init_simulation, is_correct_sentence, reinitialize,
                          run_episode, split_seed)
from .experiment import (ExperimentConfig, ExtractedRule, LearningCurve, LengthCurve,
                         LogisticFit, ParseFrequencyReport, PopulationResult,
                         action_label, breakdown_by_length, catalan, extract_grammar,
                         fit_logistic, logistic, merge_tables, moving_average,
                         record_parse_frequencies, run_parse_frequency_experiment,
                         run_population)

__version__ = "0.1.0"
