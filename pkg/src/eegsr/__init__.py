"""Silent-speech recognition from multichannel EEG.

Stages: IIR filtering (:mod:`eegsr.dsp`), window features
(:mod:`eegsr.features`), kernel PCA (:mod:`eegsr.kpca`), a GRU/TCN model
trained with CTC (:mod:`eegsr.net`, :mod:`eegsr.ctc`, :mod:`eegsr.train`),
LM-fused beam search (:mod:`eegsr.decode`) and WER scoring
(:mod:`eegsr.evaluation`). :mod:`eegsr.pipeline` chains them on disk.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
