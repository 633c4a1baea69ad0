from .balance import (
    BalanceManifest,
    DatasetSpec,
    balance,
    category_proportions,
    load_specs,
    write_manifest_csv,
)
from .conversations import (
    ConversationTurn,
    DatasetRecord,
    ReportSample,
    SegSample,
    gen_report_conversations,
    gen_seg_conversations,
    load_template_bank,
    parse_records_jsonl,
    record_from_dict,
    record_to_dict,
    records_to_jsonl,
)
from .sentence_pool import (
    DEFAULT_REWRITER_PROMPT,
    SentencePool,
    build_sentence_pool,
    normalize_report,
    token_f1,
)

__all__ = [
    "BalanceManifest",
    "DatasetSpec",
    "balance",
    "category_proportions",
    "load_specs",
    "write_manifest_csv",
    "ConversationTurn",
    "DatasetRecord",
    "ReportSample",
    "SegSample",
    "gen_report_conversations",
    "gen_seg_conversations",
    "load_template_bank",
    "parse_records_jsonl",
    "record_from_dict",
    "record_to_dict",
    "records_to_jsonl",
    "DEFAULT_REWRITER_PROMPT",
    "SentencePool",
    "build_sentence_pool",
    "normalize_report",
    "token_f1",
]
