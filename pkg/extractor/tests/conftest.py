import pytest

from senseextract.models import load_encoder, load_paraphraser

# 20 sentences, two senses of bank.n, uids stable in the first TSV field.
# riverbank: r01-r10, moneybank: m01-m10.
FIXTURE_SENTENCES = [
    ("r01", "riverbank", "we walked along the river bank at dawn"),
    ("r02", "riverbank", "the muddy bank collapsed after heavy rain"),
    ("r03", "riverbank", "herons nest on the far bank of the stream"),
    ("r04", "riverbank", "she moored the boat against the grassy bank"),
    ("r05", "riverbank", "reeds grow thick along both banks here"),
    ("r06", "riverbank", "the flood water rose over the bank overnight"),
    ("r07", "riverbank", "children fished from the steep bank all afternoon"),
    ("r08", "riverbank", "a path follows the bank down to the mill"),
    ("r09", "riverbank", "willows lean out from the eroded bank"),
    ("r10", "riverbank", "the otter slid down the bank into the water"),
    ("m01", "moneybank", "the bank approved the loan on friday"),
    ("m02", "moneybank", "she deposited the check at the bank"),
    ("m03", "moneybank", "the central bank raised interest rates again"),
    ("m04", "moneybank", "robbers tunneled into the bank vault overnight"),
    ("m05", "moneybank", "his bank charges a fee for transfers"),
    ("m06", "moneybank", "the bank froze the account pending review"),
    ("m07", "moneybank", "several banks failed during the panic"),
    ("m08", "moneybank", "the bank issued a new credit card"),
    ("m09", "moneybank", "she works as a teller at the local bank"),
    ("m10", "moneybank", "the bank financed the bridge construction"),
]


@pytest.fixture(scope="session")
def encoder():
    return load_encoder("fake:16")


@pytest.fixture(scope="session")
def paraphraser():
    return load_paraphraser("fake")


@pytest.fixture(scope="session")
def fixture_sentences():
    return FIXTURE_SENTENCES


@pytest.fixture(scope="session")
def fixture_lines():
    return [f"{uid}\t{text}" for uid, _, text in FIXTURE_SENTENCES]
