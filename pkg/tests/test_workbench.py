import numpy as np
import pandas as pd
import pytest

from credittext.exceptions import ValidationError
from credittext.workbench import (
    IdMapping,
    PipelineConfig,
    align_call_to_cds,
    fundamentals_availability_month,
    fundamentals_join_month,
    next_business_day,
    rating_group,
    resolve_id,
    validate_mappings,
)


class TestAlignment:
    QUOTES = pd.bdate_range("2015-03-02", "2015-03-31").astype(str)

    def test_morning_call_same_day(self):
        # 2015-03-10 is a Tuesday
        assert align_call_to_cds("2015-03-10T10:00:00", self.QUOTES) == "2015-03-10"

    def test_after_close_next_day(self):
        assert align_call_to_cds("2015-03-10T16:30:00", self.QUOTES) == "2015-03-11"

    def test_friday_evening_rolls_to_monday(self):
        assert align_call_to_cds("2015-03-13T17:00:00", self.QUOTES) == "2015-03-16"

    def test_exactly_four_pm_is_after_close(self):
        assert align_call_to_cds("2015-03-10T16:00:00", self.QUOTES) == "2015-03-11"

    def test_weekend_call_rolls_forward(self):
        assert align_call_to_cds("2015-03-14T10:00:00", self.QUOTES) == "2015-03-16"

    def test_missing_quotes_roll_forward(self):
        quotes = ["2015-03-12", "2015-03-13"]
        assert align_call_to_cds("2015-03-10T09:00:00", quotes) == "2015-03-12"

    def test_no_quote_within_five_days(self):
        quotes = ["2015-03-31"]
        assert align_call_to_cds("2015-03-10T09:00:00", quotes) is None

    def test_next_business_day_skips_weekend(self):
        assert str(next_business_day(pd.Timestamp("2015-03-13")).date()) == "2015-03-16"


class TestFundamentalLag:
    def test_availability(self):
        assert fundamentals_availability_month("2015-03-31") == "2015-06"

    def test_join_month(self):
        assert fundamentals_join_month("2015-06") == "2015-03"

    def test_round_trip(self):
        assert fundamentals_availability_month("2014-11-30") == "2015-02"
        assert fundamentals_join_month("2015-02") == "2014-11"


class TestIdMapping:
    MAPS = [
        IdMapping("A", "X1", "2010-01-01", "2014-12-31"),
        IdMapping("A", "X2", "2015-01-01", "2020-12-31"),
        IdMapping("B", "Y1", "2010-01-01", "2020-12-31"),
    ]

    def test_unique_match(self):
        assert resolve_id("A", "2012-06-15", self.MAPS) == "X1"
        assert resolve_id("A", "2016-01-01", self.MAPS) == "X2"

    def test_unmatched_outside_intervals(self):
        assert resolve_id("A", "2021-05-01", self.MAPS) is None
        assert resolve_id("Z", "2012-01-01", self.MAPS) is None

    def test_ambiguity_error_lists_both(self):
        maps = self.MAPS + [IdMapping("A", "X3", "2012-01-01", "2013-12-31")]
        with pytest.raises(ValidationError, match="X1.*X3|X3.*X1"):
            resolve_id("A", "2012-06-15", maps)

    def test_invalid_interval(self):
        with pytest.raises(ValidationError):
            IdMapping("A", "X", "2015-01-01", "2014-01-01")

    def test_overlap_flagging(self):
        maps = self.MAPS + [IdMapping("B", "Y2", "2019-06-01", "2021-01-01")]
        overlaps = validate_mappings(maps)
        assert len(overlaps) == 1
        assert {overlaps[0][0].target_id, overlaps[0][1].target_id} == {"Y1", "Y2"}


class TestRatingGroup:
    def test_ig_letters(self):
        for r in ("AAA", "AA", "A", "BBB"):
            assert rating_group(r) == "IG"

    def test_hy_letters_and_unclassified(self):
        for r in ("BB", "B", "CCC", "D", "unclassified"):
            assert rating_group(r) == "HY"

    def test_integer_codes(self):
        assert rating_group(1) == "IG"
        assert rating_group(4) == "IG"
        assert rating_group(5) == "HY"
        assert rating_group(9) == "HY"


class TestPipelineConfig:
    def test_defaults_valid(self):
        cfg = PipelineConfig()
        assert cfg.top_n == [2000]

    def test_menu_enforced(self):
        with pytest.raises(ValidationError, match="menu"):
            PipelineConfig(top_n=[1234])
        with pytest.raises(ValidationError, match="menu"):
            PipelineConfig(update_frequency_months=[6])

    def test_tc_third_accepted(self):
        cfg = PipelineConfig(t_c=[1 / 3, 0.5])
        assert len(cfg.t_c) == 2

    def test_menus_can_be_disabled(self):
        cfg = PipelineConfig(top_n=[50], n_fs=[10], enforce_menus=False)
        assert cfg.top_n == [50]

    def test_bad_bounds(self):
        with pytest.raises(ValidationError, match="straddle"):
            PipelineConfig(bounds={"IG": {"lower": 0.1, "upper": 0.5,
                                          "short_limit": -1, "long_limit": 1}})

    def test_from_json_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"nonsense": 1}')
        with pytest.raises(ValidationError, match="nonsense"):
            PipelineConfig.from_json(path)

    def test_rolling_configs_cartesian(self):
        cfg = PipelineConfig(top_n=[2000, 5000], n_fs=[250],
                             lookback_months=[24, "expanding"])
        assert len(cfg.rolling_configs()) == 4


class TestSynth:
    def test_same_seed_identical(self):
        from credittext.synth import generate_synthetic_universe

        a = generate_synthetic_universe(seed=5, n_entities=4, n_months=8, vocab_size=30)
        b = generate_synthetic_universe(seed=5, n_entities=4, n_months=8, vocab_size=30)
        pd.testing.assert_frame_equal(a.transcripts, b.transcripts)
        pd.testing.assert_frame_equal(a.cds_daily, b.cds_daily)
        assert a.truth["token_coefficients"] == b.truth["token_coefficients"]

    def test_different_seed_differs(self):
        from credittext.synth import generate_synthetic_universe

        a = generate_synthetic_universe(seed=5, n_entities=4, n_months=8, vocab_size=30)
        c = generate_synthetic_universe(seed=6, n_entities=4, n_months=8, vocab_size=30)
        assert not a.cds_daily.equals(c.cds_daily)

    def test_spreads_invert_to_planted_pvlgds(self):
        from credittext.pricing import ContractSpec, SpreadConverter
        from credittext.synth import generate_synthetic_universe

        bundle = generate_synthetic_universe(seed=7, n_entities=3, n_months=6,
                                             vocab_size=30)
        spec = ContractSpec(risk_free_rate=bundle.truth["risk_free_rate"])
        conv = SpreadConverter(spec)
        got = conv.pvlgd_from_spread(bundle.cds_daily["spread_bp"].to_numpy())
        assert np.all(got > 0.4) and np.all(got < 50.0)

    def test_shuffle_breaks_link_keeps_ids(self):
        from credittext.synth import generate_synthetic_universe, shuffle_transcript_texts

        bundle = generate_synthetic_universe(seed=8, n_entities=6, n_months=9,
                                             vocab_size=40)
        shuffled = shuffle_transcript_texts(bundle.transcripts, seed=1)
        assert list(shuffled["call_id"]) == list(bundle.transcripts["call_id"])
        assert not shuffled["text"].equals(bundle.transcripts["text"])

    def test_write_to(self, tmp_path):
        from credittext.synth import generate_synthetic_universe

        bundle = generate_synthetic_universe(seed=9, n_entities=2, n_months=4,
                                             vocab_size=20)
        bundle.write_to(tmp_path)
        for name in ("transcripts", "cds_daily", "equity", "fundamentals",
                     "analyst", "ratings"):
            assert (tmp_path / f"{name}.csv").exists()
        assert (tmp_path / "truth.json").exists()
