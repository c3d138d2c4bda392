# Belief-state networks
# worlds loads first: its modules import beliefnet submodules
from worlds.errors import QuestionError  # noqa: I001

from beliefnet.base import BeliefModel
from beliefnet.convnet import ConvBeliefNet, ConvNetConfig, LSTMState, auto_depth, block_policy
from beliefnet.encoding import ChannelStack, encode_fc, encode_fc_batch, encode_image, statement_map
from beliefnet.factory import ARCHITECTURES, ModelGeometry, build_model
from beliefnet.fcnet import FCBeliefNet, FCNetConfig
from beliefnet.history import TrialHistory
from beliefnet.outputs import STATEMENT_DIM, BeliefOutputs, Conditioning
from beliefnet.params import ParameterSet
