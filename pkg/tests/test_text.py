from __future__ import annotations

import string

from hypothesis import given, settings
from hypothesis import strategies as st

from chadpod.text import (
    SentenceSeq,
    abbreviations,
    allowed_chars,
    count_sentences,
    has_unusual_chars,
    is_dialogue,
    normalize_text,
    split_sentences,
)


class TestSplitSentences:
    def test_empty_input(self):
        assert split_sentences("").sentences == ()
        assert split_sentences("   \n\t ").sentences == ()

    def test_two_plain_sentences(self):
        assert split_sentences("Hello. World.").sentences == ("Hello.", "World.")

    def test_abbreviation_from_shipped_list(self):
        # "Mr." is in the data file, so the first period must not split.
        assert "Mr." in abbreviations()
        got = split_sentences("Mr. Smith left. He ran.")
        assert got.sentences == ("Mr. Smith left.", "He ran.")

    def test_more_abbreviations(self):
        assert split_sentences("She saw Dr. Reed at the door. He waved.").sentences == (
            "She saw Dr. Reed at the door.",
            "He waved.",
        )
        assert split_sentences("They met on St. John Lane. It rained.").sentences == (
            "They met on St. John Lane.",
            "It rained.",
        )

    def test_abbreviation_requires_word_start(self):
        # "asleep." ends with the letters of "p." but is a full word.
        got = split_sentences("He fell asleep. The fire died.")
        assert len(got) == 2

    def test_ellipsis_never_splits(self):
        assert split_sentences("Wait... he thought. Then he ran.").sentences == (
            "Wait... he thought.",
            "Then he ran.",
        )

    def test_closing_quote_after_terminal(self):
        got = split_sentences('"Stop!" He fled into the dark.')
        assert got.sentences == ('"Stop!"', "He fled into the dark.")

    def test_question_and_bang(self):
        assert count_sentences("Really?! Yes. No?") == 3

    def test_no_trailing_punctuation(self):
        assert split_sentences("First one. and then nothing").sentences == (
            "First one.",
            "and then nothing",
        )

    def test_whitespace_normalization(self):
        got = split_sentences("One  here.\n\nTwo\tthere.")
        assert got.sentences == ("One here.", "Two there.")

    def test_join_reproduces_normalized_text(self):
        text = "A first thing happened.  Then a second  thing. And a third?"
        got = split_sentences(text)
        assert " ".join(got.sentences) == normalize_text(text)

    def test_boundary_semantics(self):
        seq = SentenceSeq(("A.", "B.", "C."))
        assert list(seq.boundaries()) == [1, 2]
        assert seq.join_range(0, 2) == "A. B."
        assert seq.join_range(2, 3) == "C."


_texty = st.text(
    alphabet=string.ascii_letters + " .!?\"'",
    min_size=0,
    max_size=200,
)


@given(_texty)
@settings(max_examples=200)
def test_split_idempotent_under_rejoin(text):
    once = split_sentences(text)
    again = split_sentences(" ".join(once.sentences))
    assert again.sentences == once.sentences


@given(_texty)
@settings(max_examples=200)
def test_no_empty_sentences_and_join_invariant(text):
    seq = split_sentences(text)
    assert all(s for s in seq.sentences)
    assert " ".join(seq.sentences) == normalize_text(text)


@given(_texty)
@settings(max_examples=100)
def test_count_monotone_under_appended_sentence(text):
    before = count_sentences(text)
    after = count_sentences(text + " Something else happened then.")
    assert after >= before


class TestIsDialogue:
    def test_fully_quoted(self):
        assert is_dialogue('"Hi." "Bye."') is True

    def test_unquoted(self):
        assert is_dialogue("He ran. He hid.") is False

    def test_one_of_three_is_below_half(self):
        text = '"Where to?" She pointed at the hills. He nodded once.'
        assert is_dialogue(text) is False

    def test_exactly_half_counts(self):
        assert is_dialogue('"Go." He went.') is True

    def test_empty(self):
        assert is_dialogue("") is False

    def test_curly_quotes(self):
        assert is_dialogue("“Well?” ‘Fine.’") is True


class TestHasUnusualChars:
    def test_plain(self):
        assert has_unusual_chars("plain text.") is False

    def test_control_char(self):
        assert has_unusual_chars("bad \x00 byte") is True

    def test_star_against_allow_list(self):
        assert "★" not in allowed_chars()
        assert has_unusual_chars("a ★ here") is True

    def test_common_typography_allowed(self):
        assert has_unusual_chars("café — déjà vu… “ok”") is False

    def test_cyrillic_flagged(self):
        assert has_unusual_chars("ж") is True


@given(st.text(max_size=100))
@settings(max_examples=200)
def test_filters_total_on_arbitrary_text(text):
    # Pure and total: never raise, always return a bool.
    assert is_dialogue(text) in (True, False)
    assert has_unusual_chars(text) in (True, False)
