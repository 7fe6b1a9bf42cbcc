"""Knowledge-base embeddings for relation prediction and score fusion."""

from .errors import (BindingError, ConfigError, FormatError, KBError, ModelKindError,
                     NumericalError, ParseError, SamplingError, VocabularyError)
from .evaluation import (EvalReport, RankResult, evaluate_relation_prediction, rank_from_scores,
                         rank_relation)
from .fusion import (FusionConfig, RankedPrediction, REScoreRow, composite_score, curve_auc,
                     load_gold, load_re_scores, normalize_kbe, precision_recall_curve,
                     predict_relation, re_only_ranking, rescore)
from .kg import (FilterIndex, KnowledgeBase, Triple, Vocab, build_filter_index,
                 generate_synthetic_kb, load_kb, load_triples, save_kb)
from .models import (ModelKind, ModelParams, Norm, load_checkpoint, save_checkpoint,
                     score, score_all_relations, score_complex, score_distmult, score_gradients,
                     score_transe)
from .trainer import (TrainConfig, TrainReport, init_params, logistic_step, margin_step,
                      sample_negative, train)

__version__ = "0.1.0"
