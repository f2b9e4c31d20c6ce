import math

import numpy as np
import pytest

from moltr import data, distill, nn
from moltr.errors import ConfigError, InputError, ParseError, TrainingError
from moltr.evaluation import kendall_tau, rank_order


def score_tau(scores_a, scores_b, item_ids):
    return kendall_tau(rank_order(scores_a, item_ids), rank_order(scores_b, item_ids))


def gen_config(**kwargs):
    defaults = dict(num_queries=80, items_per_query=(4, 6), m=6, K=3, seed=3)
    defaults.update(kwargs)
    return data.GeneratorConfig(**defaults)


def train_config(**kwargs):
    defaults = dict(
        mlp=nn.MlpConfig(layer_dims=(6, 8, 1), init_scale=0.3, seed=5),
        alpha=0.2,
        epochs=4,
        learning_rate=0.05,
        seed=5,
    )
    defaults.update(kwargs)
    return distill.DistillConfig(**defaults)


@pytest.fixture(scope="module")
def dataset():
    return data.generate_dataset(gen_config())


@pytest.fixture(scope="module")
def teachers(dataset):
    return distill.train_teachers(dataset, train_config(alpha=1.0))


@pytest.fixture(scope="module")
def soft(teachers, dataset):
    return distill.fuse_soft_labels(teachers, dataset)


class TestDistillConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            train_config(alpha=-0.1)
        with pytest.raises(ConfigError):
            train_config(temperature=0.0)
        with pytest.raises(ConfigError):
            train_config(learning_rate=0.0)
        with pytest.raises(ConfigError):
            train_config(epochs=-1)

    def test_round_trip(self):
        config = train_config(teacher_temperature=2.5)
        assert distill.DistillConfig.from_dict(config.to_dict()) == config

    def test_with_seed_reseeds_mlp(self):
        config = train_config().with_seed(99)
        assert config.seed == 99
        assert config.mlp.seed == 99
        assert config.mlp.layer_dims == (6, 8, 1)


class TestModel:
    def test_save_load_round_trip(self, dataset, teachers, tmp_path):
        model = teachers.models[0]
        path = tmp_path / "teacher.json"
        model.save(path)
        loaded = distill.Model.load(path)
        assert loaded.lineage == model.lineage
        assert loaded.params == model.params
        g = dataset.groups[0]
        assert np.array_equal(loaded.score_group(g), model.score_group(g))

    def test_params_config_mismatch(self):
        config = nn.MlpConfig(layer_dims=(6, 8, 1), seed=0)
        params = nn.init_params(nn.MlpConfig(layer_dims=(6, 4, 1), seed=0))
        with pytest.raises(InputError):
            distill.Model(config=config, params=params, lineage="x", seed=0)


class TestTeacherEnsemble:
    def test_weights_normalized(self, teachers):
        ens = distill.TeacherEnsemble(
            models=teachers.models, fusion_weights=np.array([2.0, 1.0, 1.0])
        )
        assert ens.fusion_weights.tolist() == [0.5, 0.25, 0.25]

    def test_default_uniform(self, teachers):
        assert np.allclose(teachers.fusion_weights, 1.0 / 3.0)

    def test_rejects_negative(self, teachers):
        with pytest.raises(ConfigError):
            distill.TeacherEnsemble(
                models=teachers.models, fusion_weights=np.array([1.0, -1.0, 1.0])
            )

    def test_rejects_all_zero(self, teachers):
        with pytest.raises(ConfigError):
            distill.TeacherEnsemble(
                models=teachers.models, fusion_weights=np.zeros(3)
            )


class TestTeachers:
    def test_deterministic(self, dataset):
        a = distill.train_teacher(dataset, 0, train_config(alpha=1.0))
        b = distill.train_teacher(dataset, 0, train_config(alpha=1.0))
        assert a.params == b.params
        c = distill.train_teacher(dataset, 0, train_config(alpha=1.0).with_seed(6))
        assert a.params != c.params

    def test_lineage_names_objective(self, teachers):
        assert teachers.models[0].lineage == "teacher:booking"
        assert teachers.models[1].lineage == "teacher:cancellation"
        assert teachers.models[2].lineage == "teacher:quality"

    def test_out_of_range_objective(self, dataset):
        with pytest.raises(InputError):
            distill.train_teacher(dataset, 9, train_config())

    def test_zero_coverage_raises(self):
        # Strip all secondary labels so objective 1 has no coverage.
        ds = data.generate_dataset(gen_config(num_queries=20))
        for g in ds.groups:
            for row in g.labels:
                row[1] = None
                row[2] = None
        with pytest.raises(TrainingError, match="coverage"):
            distill.train_teacher(ds, 1, train_config())

    def test_teacher_learns_primary_order(self, dataset):
        # More epochs should produce a teacher that ranks the booked item
        # highly much more often than an untrained net does.
        config = train_config(alpha=1.0, epochs=12)
        model = distill.train_teacher(dataset, 0, config)
        fresh = distill.Model(
            config=config.mlp,
            params=nn.init_params(config.mlp),
            lineage="untrained",
            seed=config.seed,
        )

        def top1_hits(m):
            hits = total = 0
            for g in dataset.groups:
                if not g.has_labels_for(0):
                    continue
                total += 1
                booked = int(np.argmax(g.primary_labels()))
                if int(np.argmax(m.score_group(g))) == booked:
                    hits += 1
            return hits / total

        assert top1_hits(model) > top1_hits(fresh) + 0.1


class TestFusion:
    def test_weighted_sum_identity(self, teachers, dataset):
        g = dataset.groups[0]
        fused = distill.fusion_serve_scores(teachers, g)
        manual = sum(
            w * m.score_group(g)
            for w, m in zip(teachers.fusion_weights, teachers.models)
        )
        assert np.allclose(fused, manual, atol=1e-12)

    def test_two_model_hand_example(self, teachers, dataset):
        # Equal weights over scores (1, 3) and (3, 1) fuse to (2, 2).
        g = dataset.groups[0]
        m = teachers.models[0]
        ens = distill.TeacherEnsemble(models=[m, m], fusion_weights=np.array([0.5, 0.5]))
        fused = distill.fusion_serve_scores(ens, g)
        assert np.allclose(fused, m.score_group(g), atol=1e-12)

    def test_soft_labels_cover_every_group(self, soft, dataset):
        soft.check_alignment(dataset)
        assert soft.provenance == "teacher_fusion"
        assert len(soft.scores) == len(dataset)

    def test_distribution_temperature(self, soft, dataset):
        qid = dataset.groups[0].query_id
        d1 = soft.distribution(qid, 1.0)
        d4 = soft.distribution(qid, 4.0)
        assert abs(d1.sum() - 1.0) < 1e-9
        assert d4.max() <= d1.max() + 1e-12  # higher temperature flattens

    def test_misalignment_detected(self, soft):
        other = data.generate_dataset(gen_config(num_queries=90, seed=8))
        with pytest.raises(InputError, match="misaligned"):
            soft.check_alignment(other)

    def test_save_load_round_trip(self, soft, tmp_path):
        path = tmp_path / "soft.jsonl"
        soft.save(path)
        loaded = distill.SoftLabelSet.load(path)
        assert loaded.provenance == soft.provenance
        assert set(loaded.scores) == set(soft.scores)
        for qid in soft.scores:
            assert np.array_equal(loaded.scores[qid], soft.scores[qid])

    def test_load_bad_header(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{}\n")
        with pytest.raises(ParseError):
            distill.SoftLabelSet.load(path)


class TestBoostRule:
    def test_predicates(self):
        high = data.Item(item_id=0, features=np.zeros(3), review_rating=4.5, is_new=False)
        low = data.Item(item_id=1, features=np.zeros(3), review_rating=3.0, is_new=False)
        new = data.Item(item_id=2, features=np.zeros(3), review_rating=0.0, is_new=True)
        rating = distill.BoostRule(predicate="rating_at_least", rho=4.0, beta=1.0)
        assert rating.matches(high) and not rating.matches(low)
        assert not rating.matches(new)  # new items carry rating 0
        newness = distill.BoostRule(predicate="is_new", beta=1.0)
        assert newness.matches(new) and not newness.matches(high)

    def test_unknown_predicate(self):
        with pytest.raises(ConfigError):
            distill.BoostRule(predicate="price_below", beta=1.0)

    def test_boost_shifts_distribution(self, dataset):
        # Raw scores (0, 0) with beta = ln 3 on the second item give a
        # (0.25, 0.75) soft distribution.
        g = dataset.groups[0]
        base = distill.SoftLabelSet(
            scores={gr.query_id: np.zeros(gr.size) for gr in dataset.groups},
            provenance="test",
        )
        rule = distill.BoostRule(predicate="is_new", beta=math.log(3.0))
        boosted = distill.inject_boost(base, rule, dataset)
        assert boosted.provenance.startswith("boosted(")
        for gr in dataset.groups:
            mask = rule.match_mask(gr)
            expected = np.where(mask, math.log(3.0), 0.0)
            assert np.allclose(boosted.scores[gr.query_id], expected)
            if mask.sum() == 1 and gr.size == 2:
                d = boosted.distribution(gr.query_id)
                assert sorted(d.tolist()) == pytest.approx([0.25, 0.75], abs=1e-12)

    def test_zero_beta_is_identity(self, soft, dataset):
        rule = distill.BoostRule(predicate="is_new", beta=0.0)
        boosted = distill.inject_boost(soft, rule, dataset)
        for qid in soft.scores:
            assert np.array_equal(boosted.scores[qid], soft.scores[qid])


class TestStudent:
    def test_deterministic(self, dataset, soft):
        a = distill.train_student(dataset, soft, train_config())
        b = distill.train_student(dataset, soft, train_config())
        assert a.params == b.params
        assert a.lineage == "student_v0"

    def test_alpha_one_matches_hard_only_bitwise(self, dataset, soft):
        # With alpha = 1 the soft term is skipped entirely, so the student
        # trainer and the hard-only baseline produce identical bits even
        # though they are distinct code paths.
        student = distill.train_student(dataset, soft, train_config(alpha=1.0))
        hard = distill.train_hard_only(dataset, train_config(alpha=1.0))
        assert student.params == hard.params

    def test_soft_labels_change_outcome(self, dataset, soft):
        blended = distill.train_student(dataset, soft, train_config(alpha=0.2))
        hard = distill.train_hard_only(dataset, train_config(alpha=0.2))
        assert blended.params != hard.params

    def test_alpha_zero_tracks_soft_labels(self, dataset, soft):
        # Pure soft training converges to the soft-label ranking.
        config = train_config(alpha=0.0, epochs=60, learning_rate=0.08)
        model = distill.train_student(dataset, soft, config)
        taus = [
            score_tau(model.score_group(g), soft.scores[g.query_id], g.item_ids())
            for g in dataset.groups
        ]
        assert float(np.mean(taus)) > 0.9

    def test_misaligned_soft_labels(self, soft):
        other = data.generate_dataset(gen_config(num_queries=50, seed=9))
        with pytest.raises(InputError):
            distill.train_student(other, soft, train_config())

    def test_empty_dataset(self, soft, dataset):
        empty = data.Dataset(
            objectives=list(dataset.objectives), groups=[], m=dataset.m, K=dataset.K
        )
        with pytest.raises(TrainingError):
            distill.train_student(empty, distill.SoftLabelSet({}, "x"), train_config())


class TestSelfDistill:
    def test_versioning_and_freeze(self, dataset, soft):
        v0 = distill.train_student(dataset, soft, train_config())
        before = v0.params.copy()
        new_data = data.generate_dataset(gen_config(num_queries=60, seed=21))
        v1 = distill.self_distill_step(v0, new_data, train_config())
        assert v1.lineage == "student_v1"
        assert v0.params == before  # previous student untouched
        v2 = distill.self_distill_step(v1, new_data, train_config())
        assert v2.lineage == "student_v2"
        assert distill.student_version(v2) == 2

    def test_feature_dim_checked(self, dataset, soft):
        v0 = distill.train_student(dataset, soft, train_config())
        other = data.generate_dataset(gen_config(m=8, num_queries=10))
        with pytest.raises(InputError):
            distill.self_distill_step(v0, other, train_config())

    def test_stays_close_to_previous(self, dataset, soft):
        # One self-distillation round should agree with its source model
        # far more than with an unrelated model.
        v0 = distill.train_student(dataset, soft, train_config(epochs=8))
        new_data = data.generate_dataset(gen_config(num_queries=60, seed=21))
        v1 = distill.self_distill_step(
            v0, new_data, train_config(epochs=30, alpha=0.0)
        )
        taus = [
            score_tau(v1.score_group(g), v0.score_group(g), g.item_ids())
            for g in new_data.groups
        ]
        assert float(np.mean(taus)) > 0.7


class TestScalarized:
    def test_weight_validation(self, dataset):
        with pytest.raises(ConfigError):
            distill.train_scalarized_baseline(dataset, [1.0, 1.0], train_config())
        with pytest.raises(ConfigError):
            distill.train_scalarized_baseline(dataset, [0.0, 0.0, 0.0], train_config())
        with pytest.raises(ConfigError):
            distill.train_scalarized_baseline(dataset, [1.0, -1.0, 1.0], train_config())

    def test_sparse_objectives_take_fewer_steps(self, dataset):
        log = []
        distill.train_scalarized_baseline(
            dataset, [1.0, 1.0, 1.0], train_config(epochs=2), batch_log=log
        )
        steps = log[0]["per_objective_steps"]
        assert steps[0] > steps[1]
        assert steps[0] > steps[2]

    def test_primary_only_matches_teacher_bitwise(self):
        # With weight only on the primary objective and every query booked,
        # the scalarized trainer and the primary teacher take identical
        # steps in the same order.
        ds = data.generate_dataset(gen_config(num_queries=50, primary_rate=1.0))
        config = train_config()
        scalarized = distill.train_scalarized_baseline(ds, [1.0, 0.0, 0.0], config)
        teacher = distill.train_teacher(ds, 0, config)
        assert scalarized.params == teacher.params

    def test_lineage(self, dataset):
        model = distill.train_scalarized_baseline(
            dataset, [1.0, 1.0, 1.0], train_config(epochs=1)
        )
        assert model.lineage == "baseline:scalarized"


class TestScoreDataset:
    def test_covers_all_groups(self, dataset, teachers):
        scores = distill.score_dataset(teachers.models[0], dataset)
        assert set(scores) == {g.query_id for g in dataset.groups}
        for g in dataset.groups:
            assert scores[g.query_id].shape == (g.size,)

    def test_dim_mismatch(self, teachers):
        other = data.generate_dataset(gen_config(m=9, num_queries=5))
        with pytest.raises(InputError):
            distill.score_dataset(teachers.models[0], other)
