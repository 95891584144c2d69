"""istruttore: a desk-scale Italian instruction-tuning and evaluation toolkit.

Pipeline stages, each exposed both as a library module and a CLI subcommand:

- ``records``    parse/validate/serialize instruction datasets and task data
- ``translate``  field-by-field dataset translation over a chat-completion API
- ``prompts``    render the two Italian instruction templates, extract answers
- ``model`` / ``train``  a tiny attention LM with LoRA adapters on Q/V
- ``decoding``   temperature + top-k/top-p sampling and beam search
- ``metrics``    ROUGE-1/2/L, EM/F1, BERTScore, LLM-judge verdicts
- ``harness``    zero-shot task runs, failure flags, report tables
"""

__version__ = "0.1.0"
