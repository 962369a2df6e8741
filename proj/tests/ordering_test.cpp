#include <gtest/gtest.h>

#include "attrcrit/attribution.hpp"
#include "attrcrit/ordering.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace attrcrit;

namespace {

AttributionMap mapFromScores(const std::vector<double>& scores, const std::string& name) {
    return AttributionMap{Tensor({scores.size()}, scores), name, 0, 0.0, {}};
}

struct MaxFixture {
    Model model = fixtures::makeMaxModel();
    Tensor x{std::vector<std::size_t>{3}, std::vector<double>{1.0, 1.0, 1.0}};
    ScoreFn score = makeClassScoreFn(model, 0, ScoreMode::logit);
};

} // namespace

TEST(OrderingTest, OrderPixelsTableExamples) {
    // A2: scores (2/3, 0, 1/3) -> order x1, x3, x2; positive prefix excludes the zero
    const OrderedPixels a2 = orderPixels(mapFromScores(fixtures::maxModelScoresA2(), "A2"));
    EXPECT_EQ(a2.order, (std::vector<std::size_t>{0, 2, 1}));
    EXPECT_EQ(a2.positive_count, 2u);

    // A1: all positive, ascending scores -> reversed index order
    const OrderedPixels a1 = orderPixels(mapFromScores(fixtures::maxModelScoresA1(), "A1"));
    EXPECT_EQ(a1.order, (std::vector<std::size_t>{2, 1, 0}));
    EXPECT_EQ(a1.positive_count, 3u);
    EXPECT_NEAR(a1.cumulative_share[1], 0.5, 1e-12);
    EXPECT_NEAR(a1.cumulative_share[2], 5.0 / 6.0, 1e-12);
    EXPECT_DOUBLE_EQ(a1.cumulative_share[3], 1.0);
}

TEST(OrderingTest, OrderPixelsTieBreakAscendingIndex) {
    const OrderedPixels op = orderPixels(mapFromScores({0.5, 0.5, 0.5}, "flat"));
    EXPECT_EQ(op.order, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(OrderingTest, EmptyPositiveSet) {
    EXPECT_THROW(orderPixels(mapFromScores({0.0, -1.0, 0.0}, "none")), EmptyPositiveSetError);
}

TEST(OrderingTest, MaxModelAblationCurve) {
    MaxFixture f;
    const OrderedPixels a3 = orderPixels(mapFromScores(fixtures::maxModelScoresA3(), "A3"));
    const PerturbationCurve curve = ablationCurve(f.score, f.x, a3, 0.0, 1);
    ASSERT_EQ(curve.points.size(), 3u);
    EXPECT_DOUBLE_EQ(curve.points[0].R, 1.0);
    EXPECT_DOUBLE_EQ(curve.points[1].R, 1.0);
    EXPECT_DOUBLE_EQ(curve.points[2].R, 0.0);
    EXPECT_DOUBLE_EQ(curve.y0, 1.0);
    EXPECT_DOUBLE_EQ(curve.yb, 0.0);
}

TEST(OrderingTest, MaxModelConstructionCurve) {
    MaxFixture f;
    const OrderedPixels a3 = orderPixels(mapFromScores(fixtures::maxModelScoresA3(), "A3"));
    const PerturbationCurve curve = constructionCurve(f.score, f.x, a3, 0.0, 1);
    ASSERT_EQ(curve.points.size(), 3u);
    EXPECT_DOUBLE_EQ(curve.points[0].R, 0.0);
    EXPECT_DOUBLE_EQ(curve.points[1].R, 1.0);
    EXPECT_DOUBLE_EQ(curve.points[2].R, 1.0);
}

TEST(OrderingTest, CoarsestChunkGivesTwoPoints) {
    MaxFixture f;
    const OrderedPixels a1 = orderPixels(mapFromScores(fixtures::maxModelScoresA1(), "A1"));
    const PerturbationCurve curve = ablationCurve(f.score, f.x, a1, 0.0, 3);
    ASSERT_EQ(curve.points.size(), 2u);
    EXPECT_DOUBLE_EQ(curve.points[0].R, 1.0); // unperturbed
    EXPECT_DOUBLE_EQ(curve.points[1].R, 0.0); // fully ablated
}

TEST(OrderingTest, NOrdHandEnumeratedValues) {
    MaxFixture f;
    const auto nOrdOf = [&](const std::vector<double>& scores) {
        const OrderedPixels op = orderPixels(mapFromScores(scores, "m"));
        return nOrd(ablationCurve(f.score, f.x, op, 0.0, 1));
    };
    EXPECT_NEAR(nOrdOf(fixtures::maxModelScoresA3()), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(nOrdOf(fixtures::maxModelScoresA2()), 1.0, 1e-12);
    EXPECT_NEAR(nOrdOf(fixtures::maxModelScoresA1()), 3.0 / 4.0, 1e-12);
}

TEST(OrderingTest, SOrdHandEnumeratedValues) {
    MaxFixture f;
    const auto sOrdOf = [&](const std::vector<double>& scores) {
        const OrderedPixels op = orderPixels(mapFromScores(scores, "m"));
        return sOrd(constructionCurve(f.score, f.x, op, 0.0, 1));
    };
    EXPECT_NEAR(sOrdOf(fixtures::maxModelScoresA3()), -1.0 / 3.0, 1e-12);
    EXPECT_NEAR(sOrdOf(fixtures::maxModelScoresA2()), -1.0 / 3.0, 1e-12);
    EXPECT_NEAR(sOrdOf(fixtures::maxModelScoresA1()), -1.0 / 2.0, 1e-12);
}

TEST(OrderingTest, StrictOrderingsAcrossMethods) {
    MaxFixture f;
    const auto metrics = [&](const std::vector<double>& scores) {
        const OrderedPixels op = orderPixels(mapFromScores(scores, "m"));
        return std::pair{nOrd(ablationCurve(f.score, f.x, op, 0.0, 1)),
                         sOrd(constructionCurve(f.score, f.x, op, 0.0, 1))};
    };
    const auto [n1, s1] = metrics(fixtures::maxModelScoresA1());
    const auto [n2, s2] = metrics(fixtures::maxModelScoresA2());
    const auto [n3, s3] = metrics(fixtures::maxModelScoresA3());
    EXPECT_LT(n3, n1);
    EXPECT_LT(n1, n2);
    EXPECT_EQ(s2, s3);
    EXPECT_GT(s2, s1);
}

TEST(OrderingTest, AopcHandEnumerated) {
    MaxFixture f;
    const OrderedPixels a3 = orderPixels(mapFromScores(fixtures::maxModelScoresA3(), "A3"));
    const PerturbationCurve full =
        ablationCurve(f.score, f.x, a3, 0.0, 1, CurveScope::full_order);
    ASSERT_EQ(full.points.size(), 4u);
    EXPECT_NEAR(aopc(full, 3), 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(aopc(full, 0), 0.0); // unperturbed only
    EXPECT_THROW(aopc(full, 4), RangeError);
}

TEST(OrderingTest, AopcConstantModelIsZero) {
    const Model constant = fixtures::makeSingleDenseModel({0.0, 0.0, 0.0}, 2.0);
    const ScoreFn score = makeClassScoreFn(constant, 0, ScoreMode::logit);
    const Tensor x({3}, {1, 1, 1});
    const OrderedPixels op = orderPixels(mapFromScores({0.3, 0.2, 0.1}, "m"));
    const PerturbationCurve full = ablationCurve(score, x, op, 0.0, 1, CurveScope::full_order);
    EXPECT_DOUBLE_EQ(aopc(full, 3), 0.0);
}

TEST(OrderingTest, ClippingSigns) {
    // N >= 0 and S <= 0 on random fixtures, by construction of the clips
    Rng rng(61);
    for (int round = 0; round < 10; ++round) {
        const Model m = fixtures::makeRandomCnn(rng, false);
        const Tensor x = fixtures::randomTensor(rng, m.input_shape, 0.0, 1.0);
        const std::size_t cls = forward(m, x).predicted;
        const ScoreFn score = makeClassScoreFn(m, cls, ScoreMode::softmax);
        AttributionMap map = saliency(m, x, cls);
        OrderedPixels op;
        try {
            op = orderPixels(map);
        } catch (const EmptyPositiveSetError&) {
            continue;
        }
        EXPECT_GE(nOrd(ablationCurve(score, x, op, 0.0, 1)), 0.0);
        EXPECT_LE(sOrd(constructionCurve(score, x, op, 0.0, 1)), 0.0);
    }
}

TEST(OrderingTest, ChunkedCurvesApproachExactScore) {
    // fixed fixture: as the chunk halves, the chunked score error is
    // non-increasing
    Rng rng(62);
    const Model m = fixtures::makeRandomCnn(rng, false, 1, 8, 2);
    const Tensor x = fixtures::randomTensor(rng, m.input_shape, 0.1, 1.0);
    const std::size_t cls = forward(m, x).predicted;
    const ScoreFn score = makeClassScoreFn(m, cls, ScoreMode::softmax);
    const AttributionMap map = saliency(m, x, cls);
    const OrderedPixels op = orderPixels(map);
    ASSERT_GE(op.positive_count, 8u);

    const double exactN = nOrd(ablationCurve(score, x, op, 0.0, 1));
    const double exactS = sOrd(constructionCurve(score, x, op, 0.0, 1));
    std::vector<double> errsN, errsS;
    for (std::size_t chunk : {8u, 4u, 2u, 1u}) {
        errsN.push_back(std::abs(nOrd(ablationCurve(score, x, op, 0.0, chunk)) - exactN));
        errsS.push_back(std::abs(sOrd(constructionCurve(score, x, op, 0.0, chunk)) - exactS));
    }
    for (std::size_t i = 1; i < errsN.size(); ++i) {
        EXPECT_LE(errsN[i], errsN[i - 1] + 1e-12);
        EXPECT_LE(errsS[i], errsS[i - 1] + 1e-12);
    }
    EXPECT_DOUBLE_EQ(errsN.back(), 0.0);
    EXPECT_DOUBLE_EQ(errsS.back(), 0.0);
}

TEST(OrderingTest, AblationZeroesEveryChannelOfAPixel) {
    // f = sum over all channels and pixels; ablating one pixel must remove
    // the contribution of all three of its channels at once
    Model m;
    m.input_shape = {3, 1, 2};
    m.class_count = 1;
    m.layers.push_back(Layer::flatten());
    m.layers.push_back(
        Layer::dense(Tensor({1, 6}, std::vector<double>(6, 1.0)), Tensor({1})));
    validateModel(m);

    const Tensor x({3, 1, 2}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const ScoreFn score = makeClassScoreFn(m, 0, ScoreMode::logit);
    const OrderedPixels op = orderPixels(mapFromScores({2.0, 1.0}, "m"));
    const PerturbationCurve curve = ablationCurve(score, x, op, 0.0, 1);
    // y0 = 2.1; ablating pixel 0 removes channels {0.1, 0.3, 0.5}
    EXPECT_NEAR(curve.points[0].R, 2.1, 1e-12);
    EXPECT_NEAR(curve.points[1].R, 2.1 - 0.9, 1e-12);
    EXPECT_NEAR(curve.points[2].R, 0.0, 1e-12);
}

TEST(OrderingTest, CurvePointsCarryShares) {
    MaxFixture f;
    const OrderedPixels a1 = orderPixels(mapFromScores(fixtures::maxModelScoresA1(), "A1"));
    const PerturbationCurve curve = ablationCurve(f.score, f.x, a1, 0.0, 1);
    ASSERT_EQ(curve.points.size(), 4u);
    EXPECT_DOUBLE_EQ(curve.points[0].k, 0.0);
    EXPECT_NEAR(curve.points[1].k, 0.5, 1e-12);
    EXPECT_NEAR(curve.points[2].k, 5.0 / 6.0, 1e-12);
    EXPECT_DOUBLE_EQ(curve.points[3].k, 1.0);
}
