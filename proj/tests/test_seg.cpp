#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vpnext/gradcheck.hpp>
#include <vpnext/metrics.hpp>
#include <vpnext/seg.hpp>

using namespace vpnext;

namespace {

// Scalar reference for the composite loss, written with plain loops and kept
// independent of the tape implementation. Same conventions: terms averaged
// over valid pixels, dice averaged over classes present in the truth.
double composite_loss_reference(const TensorData<double>& logits, const ClassMask& mask, const LossWeights& w) {
    int C = logits.shape[3];
    std::int64_t pixels = mask.size();
    std::vector<double> probs(static_cast<std::size_t>(pixels) * C);
    for (std::int64_t i = 0; i < pixels; ++i) {
        const double* row = logits.ptr() + i * C;
        double mx = row[0];
        for (int c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        double s = 0;
        for (int c = 0; c < C; ++c) s += std::exp(row[c] - mx);
        for (int c = 0; c < C; ++c) probs[static_cast<std::size_t>(i * C + c)] = std::exp(row[c] - mx) / s;
    }
    double ce = 0, focal = 0;
    std::int64_t n_valid = 0;
    std::vector<double> inter(static_cast<std::size_t>(C), 0), psum(static_cast<std::size_t>(C), 0);
    std::vector<std::int64_t> ysum(static_cast<std::size_t>(C), 0);
    for (std::int64_t i = 0; i < pixels; ++i) {
        std::uint8_t lab = mask.labels[static_cast<std::size_t>(i)];
        if (lab == ClassMask::kIgnore) continue;
        ++n_valid;
        double pt = probs[static_cast<std::size_t>(i * C + lab)];
        ce += -std::log(pt);
        focal += -std::pow(1.0 - pt, w.focal_gamma) * std::log(pt);
        ysum[lab]++;
        for (int c = 0; c < C; ++c) {
            psum[static_cast<std::size_t>(c)] += probs[static_cast<std::size_t>(i * C + c)];
            if (c == lab) inter[static_cast<std::size_t>(c)] += probs[static_cast<std::size_t>(i * C + c)];
        }
    }
    if (n_valid == 0) return 0.0;
    ce /= static_cast<double>(n_valid);
    focal /= static_cast<double>(n_valid);
    double dice_sum = 0;
    int present = 0;
    for (int c = 0; c < C; ++c) {
        if (ysum[static_cast<std::size_t>(c)] == 0) continue;
        dice_sum += 2.0 * inter[static_cast<std::size_t>(c)] /
                    (psum[static_cast<std::size_t>(c)] + static_cast<double>(ysum[static_cast<std::size_t>(c)]));
        ++present;
    }
    double dice_loss = 1.0 - dice_sum / present;
    return w.ce * ce + w.focal * focal + w.dice * dice_loss;
}

// Confusion-matrix reference independent of the ConfusionMatrix class.
double miou_reference(const ClassMask& pred, const ClassMask& truth, int C) {
    std::vector<std::int64_t> tp(static_cast<std::size_t>(C), 0), fp(static_cast<std::size_t>(C), 0),
        fn(static_cast<std::size_t>(C), 0);
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        std::uint8_t t = truth.labels[i];
        if (t == ClassMask::kIgnore) continue;
        std::uint8_t p = pred.labels[i];
        if (p == t)
            tp[t]++;
        else {
            fp[p]++;
            fn[t]++;
        }
    }
    double sum = 0;
    int n = 0;
    for (int c = 0; c < C; ++c) {
        std::int64_t denom = tp[static_cast<std::size_t>(c)] + fp[static_cast<std::size_t>(c)] + fn[static_cast<std::size_t>(c)];
        if (denom == 0) continue;
        sum += static_cast<double>(tp[static_cast<std::size_t>(c)]) / static_cast<double>(denom);
        ++n;
    }
    return n ? sum / n : 0.0;
}

ClassMask random_mask(int b, int h, int w, int C, Rng& rng, double ignore_frac = 0.0) {
    ClassMask m(b, h, w);
    for (auto& v : m.labels) {
        if (ignore_frac > 0 && rng.next_double() < ignore_frac)
            v = ClassMask::kIgnore;
        else
            v = static_cast<std::uint8_t>(rng.uniform_int(0, C - 1));
    }
    return m;
}

}  // namespace

TEST_CASE("seg_head: zero weights give uniform class probabilities at label resolution") {
    Tape<double> t;
    Rng rng(1);
    auto feat = t.leaf(random_tensor({1, 4, 4, 6}, rng));
    auto w = t.leaf(TensorData<double>({6, 5}));
    auto b = t.leaf(TensorData<double>({5}));
    auto logits = seg_head(feat, w, b, 32, 48);
    CHECK(logits.value().shape == Shape{1, 32, 48, 5});
    auto probs = softmax_rows(reshape(logits, {32 * 48, 5}));
    for (double v : probs.value().data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("seg_head rejects fewer than two classes") {
    Tape<double> t;
    auto feat = t.leaf(TensorData<double>({1, 2, 2, 3}));
    auto w = t.leaf(TensorData<double>({3, 1}));
    auto b = t.leaf(TensorData<double>({1}));
    CHECK_THROWS_AS(seg_head(feat, w, b, 8, 8), ValueError);
}

TEST_CASE("seg_head gradient vs finite differences") {
    Rng rng(2);
    ClassMask mask = random_mask(1, 8, 8, 3, rng);
    LossWeights lw;
    for (int seed = 0; seed < 10; ++seed) {
        Rng r = rng.fork(static_cast<std::uint64_t>(seed));
        auto feat = random_tensor({1, 2, 2, 4}, r);
        auto w = random_tensor({4, 3}, r);
        auto b = random_tensor({3}, r);
        auto rep = finite_diff_check({feat, w, b}, [&](Tape<double>& t, std::vector<Var<double>>& v) {
            auto logits = seg_head(v[0], v[1], v[2], 8, 8);
            return composite_loss(logits, mask, lw).total;
        }, 1e-5, 1e-4, 1e-7);
        CHECK_MESSAGE(rep.max_rel_err < 1e-4, rep.to_string());
    }
}

TEST_CASE("composite loss: gamma=0 focal term equals the CE term exactly") {
    Rng rng(3);
    auto logits = random_tensor({1, 4, 4, 3}, rng, -2, 2);
    ClassMask mask = random_mask(1, 4, 4, 3, rng, 0.2);
    Tape<double> t;
    LossWeights ce_only{0, 0, 1, 2};
    LossWeights focal_only{1, 0, 0, 0};  // gamma = 0
    double ce = composite_loss(t.leaf(logits), mask, ce_only).total.value().data[0];
    double focal = composite_loss(t.leaf(logits), mask, focal_only).total.value().data[0];
    CHECK(ce == focal);
}

TEST_CASE("composite loss: perfect one-hot logits at margin 50 are near zero") {
    Rng rng(4);
    ClassMask mask = random_mask(1, 6, 6, 4, rng);
    TensorData<double> logits({1, 6, 6, 4});
    for (int i = 0; i < 36; ++i) logits.data[static_cast<std::size_t>(i * 4 + mask.labels[static_cast<std::size_t>(i)])] = 50.0;
    Tape<double> t;
    LossWeights lw;
    auto r = composite_loss(t.leaf(logits), mask, lw);
    CHECK(r.total.value().data[0] >= 0.0);
    CHECK(r.total.value().data[0] <= 1e-3);
    CHECK(!r.all_ignored);
}

TEST_CASE("composite loss: 2x2 two-class hand case matches the scalar reference to 1e-10") {
    TensorData<double> logits({1, 2, 2, 2}, {1.2, -0.4, 0.3, 0.9, -1.0, 2.0, 0.0, 0.0});
    ClassMask mask(1, 2, 2);
    mask.labels = {0, 1, 1, ClassMask::kIgnore};
    LossWeights lw{1.0, 1.0, 1.0, 2.0};
    Tape<double> t;
    double got = composite_loss(t.leaf(logits), mask, lw).total.value().data[0];
    double want = composite_loss_reference(logits, mask, lw);
    CHECK(std::abs(got - want) < 1e-10);
}

TEST_CASE("composite loss matches the scalar reference on random cases") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Rng r = rng.fork(static_cast<std::uint64_t>(trial));
        auto logits = random_tensor({2, 3, 5, 4}, r, -3, 3);
        ClassMask mask = random_mask(2, 3, 5, 4, r, trial % 2 ? 0.3 : 0.0);
        LossWeights lw{r.uniform(0, 2), r.uniform(0, 2), r.uniform(0.1, 2), r.uniform(0, 3)};
        Tape<double> t;
        double got = composite_loss(t.leaf(logits), mask, lw).total.value().data[0];
        double want = composite_loss_reference(logits, mask, lw);
        CHECK(std::abs(got - want) < 1e-10);
        CHECK(got >= 0.0);
    }
}

TEST_CASE("composite loss: all pixels ignored is zero loss with a flag") {
    TensorData<double> logits({1, 2, 2, 3});
    ClassMask mask(1, 2, 2);
    std::fill(mask.labels.begin(), mask.labels.end(), ClassMask::kIgnore);
    Tape<double> t;
    auto r = composite_loss(t.leaf(logits), mask, LossWeights{});
    CHECK(r.all_ignored);
    CHECK(r.total.value().data[0] == 0.0);
}

TEST_CASE("composite loss gradient vs finite differences") {
    Rng rng(6);
    for (int seed = 0; seed < 20; ++seed) {
        Rng r = rng.fork(static_cast<std::uint64_t>(seed));
        auto logits = random_tensor({1, 3, 3, 3}, r, -2, 2);
        ClassMask mask = random_mask(1, 3, 3, 3, r, 0.15);
        LossWeights lw;
        auto rep = finite_diff_check({logits}, [&](Tape<double>& t, std::vector<Var<double>>& v) {
            return composite_loss(v[0], mask, lw).total;
        });
        CHECK_MESSAGE(rep.max_rel_err < 1e-6, rep.to_string());
    }
}

TEST_CASE("composite loss rejects shape mismatch and bad labels") {
    Tape<double> t;
    auto logits = t.leaf(TensorData<double>({1, 4, 4, 3}));
    ClassMask small(1, 2, 2);
    CHECK_THROWS_AS(composite_loss(logits, small, LossWeights{}), ShapeError);
    ClassMask bad(1, 4, 4);
    bad.labels[3] = 7;
    CHECK_THROWS_AS(composite_loss(logits, bad, LossWeights{}), ValueError);
}

TEST_CASE("miou: identity, disjoint, and the 1/2-1/3 hand case") {
    Rng rng(7);
    ClassMask a = random_mask(1, 8, 8, 4, rng);
    CHECK(miou(a, a, 4).miou == 1.0);

    ClassMask p(1, 2, 2), q(1, 2, 2);
    std::fill(p.labels.begin(), p.labels.end(), 0);
    std::fill(q.labels.begin(), q.labels.end(), 1);
    CHECK(miou(p, q, 2).miou == 0.0);

    // class0: TP=2 FP=1 FN=1 -> 1/2 ; class1: TP=1 FP=1 FN=1 -> 1/3
    ClassMask pred(1, 1, 5), truth(1, 1, 5);
    pred.labels = {0, 0, 0, 1, 1};
    truth.labels = {0, 0, 1, 0, 1};
    auto r = miou(pred, truth, 2);
    CHECK(r.per_class[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.per_class[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(r.miou == doctest::Approx((0.5 + 1.0 / 3) / 2).epsilon(1e-12));
}

TEST_CASE("miou matches the independent confusion reference on random pairs") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        Rng r = rng.fork(static_cast<std::uint64_t>(trial));
        int C = r.uniform_int(2, 6);
        ClassMask pred = random_mask(1, 6, 6, C, r);
        ClassMask truth = random_mask(1, 6, 6, C, r, 0.1);
        double got = miou(pred, truth, C).miou;
        double want = miou_reference(pred, truth, C);
        CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("miou is invariant under class relabeling applied to both masks") {
    Rng rng(9);
    int C = 4;
    ClassMask pred = random_mask(1, 8, 8, C, rng);
    ClassMask truth = random_mask(1, 8, 8, C, rng, 0.1);
    double base = miou(pred, truth, C).miou;
    std::vector<int> perm = {2, 0, 3, 1};
    ClassMask pred2 = pred, truth2 = truth;
    for (auto& v : pred2.labels) v = static_cast<std::uint8_t>(perm[v]);
    for (auto& v : truth2.labels)
        if (v != ClassMask::kIgnore) v = static_cast<std::uint8_t>(perm[v]);
    CHECK(miou(pred2, truth2, C).miou == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("confusion matrix merge is additive and order-free") {
    Rng rng(10);
    int C = 3;
    ClassMask p1 = random_mask(1, 5, 5, C, rng), t1 = random_mask(1, 5, 5, C, rng);
    ClassMask p2 = random_mask(1, 5, 5, C, rng), t2 = random_mask(1, 5, 5, C, rng, 0.2);

    ConfusionMatrix whole(C);
    whole.add(p1, t1);
    whole.add(p2, t2);

    ConfusionMatrix a(C), b(C);
    a.add(p1, t1);
    b.add(p2, t2);
    ConfusionMatrix merged_ab = a;
    merged_ab.merge(b);
    ConfusionMatrix merged_ba = b;
    merged_ba.merge(a);

    for (int i = 0; i < C; ++i)
        for (int j = 0; j < C; ++j) {
            CHECK(merged_ab.count(i, j) == whole.count(i, j));
            CHECK(merged_ba.count(i, j) == whole.count(i, j));
        }
}

TEST_CASE("miou rejects fewer than two classes and shape mismatch") {
    ClassMask a(1, 2, 2), b(1, 2, 2), c(1, 3, 3);
    CHECK_THROWS_AS(miou(a, b, 1), ValueError);
    CHECK_THROWS_AS(miou(a, c, 3), ShapeError);
}

TEST_CASE("logits_to_mask takes the first maximum") {
    TensorData<double> logits({1, 1, 2, 3}, {0.5, 0.5, 0.1, 0.2, 0.9, 0.9});
    auto m = logits_to_mask(logits);
    CHECK(m.at(0, 0, 0) == 0);
    CHECK(m.at(0, 0, 1) == 1);
}
