"""mockforge: low-fidelity UI mock-ups from short natural-language descriptions.

Three creation methods over one shared corpus model: a text-only retriever
(pooled description embeddings, Euclidean scan), a multi-modal retriever
(contrastively trained dual encoder, dot-product scan), and an autoregressive
generator with mixture-density outputs. Quality metrics, calibrated
filtering/reranking, grid snapping and SVG rendering finish the pipeline.
"""

from .core import (
    ClassVocabulary,
    ElementBox,
    MockupCandidate,
    SemanticClass,
    UiScreen,
    canonical_sort,
    validate_screen,
)
from .generator import (
    GeneratorConfig,
    GeneratorModel,
    GeneratorTrainConfig,
    MdnParams,
    SamplerConfig,
    mdn_nll,
    sample_element,
    sample_ui,
    train_generator,
)
from .ingest import (
    CorpusSplit,
    build_corpus,
    build_retrieval_token_view,
    extract_leaf_view,
    parse_view_hierarchy,
)
from .quality import (
    MetricCalibration,
    QualityScores,
    calibrate,
    diversity,
    docsim,
    filter_candidates,
    metric_alignment,
    metric_iou,
    metric_overlap,
    relevance,
    rerank_candidates,
    snap_to_grid,
)
from .render import render_gallery, render_svg
from .retrieval import (
    DualEncoder,
    DualEncoderConfig,
    RetrieverTrainConfig,
    VectorIndex,
    contrastive_loss,
    eval_topk,
    retrieve_multimodal,
    retrieve_text_only,
    text_index_build,
    train_dual_encoder,
)
from .textfeat import (
    EMBV_MAGIC,
    FileBackedProvider,
    HashedTfidfProvider,
    embed_tokens,
    pool_description,
    tokenize,
)

__version__ = "0.1.0"
