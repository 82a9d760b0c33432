"""Chain and tree-structured LSTMs with hand-derived gradients.

Child-Sum and N-ary Tree-LSTMs, standard/bidirectional/stacked chain LSTMs, a
node classifier and a sentence-pair similarity head, trained with AdaGrad.
"""

from .cells import (GateParams, NodeState, backward, childsum_step, init_gate_params, lstm_step,
                    nary_step, run_sequence, run_tree)
from .config import RunConfig
from .embeddings import EmbeddingTable, Vocab, build_vocab, load_embeddings, lookup
from .evaluation import accuracy, length_binned, nearest_neighbors, regression_metrics
from .heads import (classify, kl_loss_grad, nll_loss_grad, similarity_forward, sparse_target)
from .model import Model
from .params import ParamSet
from .tensor import Rng, affine_combine, elementwise, hadamard, init_mat
from .train import adagrad_step, count_params, dropout_apply, minibatch_loss_grad, train
from .trees import Tree, parse_constituency, parse_dependency, project_labels

__version__ = "0.1.0"
