from decaylab.models.systems import DampingField, SemiDiscreteSystem
from decaylab.models.builder import ASSEMBLERS, build_model
