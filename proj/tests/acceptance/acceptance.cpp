#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "helpers.hpp"
#include "hydramix/classifier/classifier.hpp"
#include "hydramix/cse/cse.hpp"
#include "hydramix/io/binary.hpp"
#include "hydramix/io/dataset_io.hpp"
#include "hydramix/io/synthetic.hpp"
#include "hydramix/masking/masking.hpp"
#include "hydramix/networks/checkpoint.hpp"
#include "hydramix/networks/networks.hpp"
#include "hydramix/numerics/ops.hpp"
#include "hydramix/pixelmix/pixelmix.hpp"
#include "hydramix/segmentation/segmentation.hpp"
#include "hydramix/training/gradcheck.hpp"
#include "hydramix/training/trainer.hpp"
#include "oracles.hpp"

namespace cl = hydramix::classifier;
namespace cse = hydramix::cse;
namespace io = hydramix::io;
namespace mk = hydramix::masking;
namespace nw = hydramix::networks;
namespace ops = hydramix::numerics;
namespace seg = hydramix::segmentation;
namespace tr = hydramix::training;
using hydramix::RngStream;
using ops::Tensor;
using testing::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failed.push_back(what);
    }
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto start = Clock::now();
  const auto results = tr::run_gradcheck_suite(0, true);
  const double secs = seconds_since(start);
  double prim = 0, composed = 0;
  std::size_t n_prim = 0, n_comp = 0;
  for (const auto& r : results) {
    const bool is_composed = r.tolerance > 1e-4;
    (is_composed ? composed : prim) = std::max(is_composed ? composed : prim, r.max_rel_error);
    ++(is_composed ? n_comp : n_prim);
    o.require(r.passed(), r.name + " error " + fmt(r.max_rel_error) + " skipped " + std::to_string(r.skipped) +
                              " of " + std::to_string(r.coordinates + r.skipped));
    o.require(r.tolerance == (is_composed ? 1e-3 : 1e-4), r.name + " tolerance");
  }
  o.require(n_prim > 20 && n_comp >= 1, "suite incomplete");
  o.require(secs < 60.0, "runtime");
  o.detail << n_prim << " primitives max rel err " << fmt(prim, 3) << " (tol 1e-4), " << n_comp
           << " composed max rel err " << fmt(composed, 3) << " (tol 1e-3), " << fmt(secs, 3) << " s";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  RngStream rng(2024);

  double conv_err = 0;
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng.below(2), ci = 1 + rng.below(3), co = 1 + rng.below(3);
    const std::size_t k = 1 + 2 * rng.below(2), h = k + rng.below(6), w = k + rng.below(6);
    const int stride = 1 + int(rng.below(2)), pad = int(rng.below(2));
    const auto x = random_tensor({n, ci, h, w}, rng), wt = random_tensor({co, ci, k, k}, rng);
    conv_err = std::max(conv_err, testing::max_abs_diff(ops::conv2d(x, wt, Tensor<double>(), stride, pad), oracle::conv_oracle(x, wt, stride, pad)));
  }
  o.require(conv_err <= 1e-10, "conv2d");

  std::size_t gather_bad = 0;
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng.below(4), c = 1 + rng.below(3), h = 2 + rng.below(6), w = 2 + rng.below(6);
    const auto f = random_tensor({n, c, h, w}, rng);
    std::vector<mk::MixingMask> masks;
    for (int b = 0; b < 2; ++b) masks.push_back(mk::grid_mask(1 + rng.below(3), n, h, w, rng));
    const auto mixed = nw::mix_features(f, std::span<const mk::MixingMask>(masks));
    const auto imgs = random_tensor<float>({n, c, h, w}, rng);
    const auto pix = hydramix::pixelmix::mask_mix_pixels(imgs, masks[0]);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t src = masks[b].at(y, x);
            gather_bad += mixed[((b * c + ch) * h + y) * w + x] != f[((src * c + ch) * h + y) * w + x];
            if (b == 0) gather_bad += pix[(ch * h + y) * w + x] != imgs[((src * c + ch) * h + y) * w + x];
          }
  }
  o.require(gather_bad == 0, "gather");

  std::size_t seg_bad = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    RngStream img_rng(5000 + s);
    oracle::Reference ref{8, 8, 3, {}};
    for (std::size_t i = 0; i < 3 * 64; ++i) ref.img.push_back(img_rng.uniform());
    const double k = 100.0 + 700.0 * img_rng.uniform();
    const double sigma = s % 2 ? 0.8 : 0.0;
    const std::size_t min_size = 1 + img_rng.below(5);
    const auto got = seg::felzenszwalb(Tensor<double>({3, 8, 8}, ref.img), {k, sigma, int(min_size)});
    seg_bad += got.labels != oracle::canonical(ref.run(k, sigma, min_size));
  }
  o.require(seg_bad == 0, std::to_string(seg_bad) + " felzenszwalb partitions differ");

  double pyr_err = 0;
  for (auto [h, w] : {std::pair<long, long>{8, 8}, {12, 10}, {9, 11}, {16, 16}}) {
    const auto x = random_tensor({1, 1, std::size_t(h), std::size_t(w)}, rng);
    const auto levels = tr::laplacian_pyramid(x, 3);
    std::vector<double> cur(x.values().begin(), x.values().end());
    long ch = h, cw = w;
    for (std::size_t l = 0; l < 3; ++l) {
      long dh = 0, dw = 0;
      const auto down = oracle::down_oracle(cur, ch, cw, dh, dw);
      const auto up = oracle::up_oracle(down, dh, dw, ch, cw);
      for (std::size_t i = 0; i < cur.size(); ++i) pyr_err = std::max(pyr_err, std::abs(levels[l][i] - (cur[i] - up[i])));
      cur = down;
      ch = dh;
      cw = dw;
    }
  }
  o.require(pyr_err <= 1e-10, "laplacian pyramid");

  o.detail << "conv2d max diff " << fmt(conv_err, 3) << ", gather mismatches " << gather_bad
           << ", felzenszwalb mismatches " << seg_bad << "/100, pyramid max diff " << fmt(pyr_err, 3);
  return o;
}

Outcome mask_properties() {
  Outcome o;
  RngStream rng(31);
  std::size_t violations = 0;
  auto check = [&](const mk::MixingMask& m) {
    const std::size_t hw = m.height * m.width;
    const auto planes = m.one_hot<double>();
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t ones = 0;
      for (std::size_t i = 0; i < m.n_sources; ++i) {
        const double v = planes[i * hw + p];
        violations += v != 0.0 && v != 1.0;
        ones += v == 1.0;
      }
      violations += ones != 1;
    }
  };
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng.below(4), h = 2 + rng.below(7), w = 2 + rng.below(7);
    std::vector<seg::SegmentationMap> maps;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint32_t> raw(h * w);
      const std::size_t labels = 1 + rng.below(6);
      for (auto& l : raw) l = std::uint32_t(rng.below(labels));
      maps.push_back(seg::SegmentationMap::from_labels(h, w, raw));
    }
    check(mk::sample_segment_mask(maps, rng.uniform(), rng));
    check(mk::grid_mask(1 + rng.below(4), n, h, w, rng));
  }
  o.require(violations == 0, "one-hot constraint");

  double worst = 0;
  for (double p : {0.2, 0.5, 0.8}) {
    const std::vector<seg::SegmentationMap> two(2, seg::SegmentationMap::from_labels(4, 4, std::vector<std::uint32_t>(16, 0)));
    std::vector<std::size_t> hits(16, 0);
    const int draws = 10000;
    for (int t = 0; t < draws; ++t) {
      const auto m = mk::sample_segment_mask(two, p, rng);
      for (std::size_t q = 0; q < 16; ++q) hits[q] += m.assignment[q] == 1;
    }
    for (auto c : hits) worst = std::max(worst, std::abs(double(c) / draws - p));
  }
  o.require(worst <= 0.02, "selection frequency");
  o.detail << "2x10^4 masks, " << violations << " constraint violations, worst per-position frequency deviation "
           << fmt(worst, 3) << " (limit 0.02)";
  return o;
}

Outcome reconstruction_learning() {
  Outcome o;
  const auto start = Clock::now();
  io::SyntheticSpec spec;
  spec.classes = 2;
  spec.per_class = 4;
  spec.size = 16;
  spec.seed = 1;
  const auto data = io::make_synthetic(spec, "train");
  const auto segs = io::segment_dataset(data, seg::SegParams::defaults_for(16, 16));
  nw::GeneratorConfig g;
  g.base_channels = 8;
  g.n_down = 2;
  nw::DiscriminatorConfig d;
  d.base_channels = 8;
  tr::TrainConfig t;
  t.n_mix = 2;
  t.max_steps = 200;
  t.lr = 3e-3;
  t.seed = 3;

  auto run = [&](double& before, double& after) {
    tr::GeneratorTrainer trainer(data, segs, g, d, t);
    before = tr::loss_reconstruction(trainer.generator(), data.images).item();
    const auto ck = tr::run_training(trainer);
    after = tr::loss_reconstruction(trainer.generator(), data.images).item();
    return nw::serialize_checkpoint(ck);
  };
  double b1 = 0, a1 = 0, b2 = 0, a2 = 0;
  const auto first = run(b1, a1);
  const double secs = seconds_since(start);
  const auto second = run(b2, a2);
  const double ratio = a1 / b1;
  o.require(ratio <= 0.10, "L_rec ratio");
  o.require(first == second && a1 == a2, "determinism");
  o.require(secs < 300.0, "runtime");
  o.detail << "L_rec " << fmt(b1) << " -> " << fmt(a1) << " (ratio " << fmt(ratio, 3) << ", limit 0.1), repeat run "
           << (first == second ? "byte-identical" : "differs") << ", " << fmt(secs, 3) << " s per run";
  return o;
}

// ---------------------------------------------------------------------------

struct EffectSetup {
  std::size_t seeds = 5;
  std::size_t n_per_class = 5;
  std::size_t generator_steps = 300;
  std::size_t classifier_epochs = 200;
};

struct EffectResults {
  std::vector<double> baseline, nmix, hydramix, hydramix_p0;
  double seconds = 0;
};

const EffectResults& effect_runs() {
  static const EffectResults results = [] {
    EffectSetup setup;
    EffectResults r;
    const auto start = Clock::now();
    io::SyntheticSpec spec;
    spec.classes = 3;
    spec.size = 24;
    spec.per_class = 20;
    spec.shared_parts = false;
    spec.seed = 7;
    const auto pool = io::make_synthetic(spec, "train");
    spec.per_class = 100;
    const auto test = io::make_synthetic(spec, "test");

    for (std::size_t s = 0; s < setup.seeds; ++s) {
      const auto train = cl::subsample(pool, setup.n_per_class, s);
      const auto segs = io::segment_dataset(train, seg::SegParams::defaults_for(24, 24));
      cl::ClassifierConfig cc;
      cc.seed = s;
      cc.epochs = setup.classifier_epochs;

      r.baseline.push_back(cl::evaluate(cl::train_classifier(train, nullptr, cc).model, test).accuracy);

      auto nm = cc;
      nm.augment = cl::AugmentKind::nmix;
      auto pixel = cl::make_pixel_augmenter(nm.augment, train, segs, nm.mix);
      r.nmix.push_back(cl::evaluate(cl::train_classifier(train, pixel.get(), nm).model, test).accuracy);

      nw::GeneratorConfig g;
      g.n_down = 1;
      nw::DiscriminatorConfig d;
      tr::TrainConfig t;
      t.max_steps = setup.generator_steps;
      t.lr = 2e-3;
      t.seed = s;
      const auto gen = tr::load_generator(tr::train_generator(train, segs, g, d, t));

      auto hy = cc;
      hy.augment = cl::AugmentKind::hydramix;
      auto feature = cl::make_generator_augmenter(gen, train, segs, hy.mix);
      r.hydramix.push_back(cl::evaluate(cl::train_classifier(train, feature.get(), hy).model, test).accuracy);

      hy.p_gen = 0.0;
      r.hydramix_p0.push_back(cl::evaluate(cl::train_classifier(train, feature.get(), hy).model, test).accuracy);
    }
    r.seconds = seconds_since(start);
    return r;
  }();
  return results;
}

Outcome direction_of_effect() {
  Outcome o;
  const auto& r = effect_runs();
  const double base = mean_of(r.baseline), nmix = mean_of(r.nmix), hydra = mean_of(r.hydramix);
  o.require(base < nmix, "baseline < NMix");
  o.require(nmix <= hydra, "NMix <= HydraMix");
  o.require(hydra - base >= 0.03, "HydraMix - baseline >= 3 points");
  o.require(r.seconds < 900.0, "runtime");
  o.detail << "mean accuracy baseline " << fmt(base, 3) << ", NMix " << fmt(nmix, 3) << ", HydraMix " << fmt(hydra, 3)
           << " (+" << fmt(100 * (hydra - base), 3) << " points), " << fmt(r.seconds, 4) << " s";
  return o;
}

Outcome mixing_ratio() {
  Outcome o;
  const auto& r = effect_runs();
  const double at_half = mean_of(r.hydramix), at_zero = mean_of(r.hydramix_p0);
  o.require(at_half >= at_zero, "accuracy at p_gen 0.5 >= p_gen 0");

  io::SyntheticSpec spec;
  spec.per_class = 4;
  spec.size = 8;
  const auto data = io::make_synthetic(spec, "train");
  double worst = 0;
  std::size_t steps = 0;
  for (double p : {0.25, 0.5, 0.75}) {
    cl::ClassifierConfig c;
    c.widths = {4};
    c.batch_size = 4;
    c.epochs = 334;
    c.augment = cl::AugmentKind::mixup;
    c.p_gen = p;
    auto aug = cl::make_pixel_augmenter(c.augment, data, {}, c.mix);
    const auto run = cl::train_classifier(data, aug.get(), c);
    steps = run.generated_steps + run.original_steps;
    worst = std::max(worst, std::abs(double(run.generated_steps) / double(steps) - p));
  }
  o.require(steps >= 1000, "step count");
  o.require(worst <= 0.05, "p_gen frequency");
  o.detail << "mean accuracy p_gen 0.5 " << fmt(at_half, 3) << " vs p_gen 0 " << fmt(at_zero, 3)
           << ", worst frequency deviation " << fmt(worst, 3) << " over " << steps << " steps (limit 0.05)";
  return o;
}

// ---------------------------------------------------------------------------

std::vector<float> unit_vec(std::size_t d, std::size_t i) {
  std::vector<float> v(d, 0.0f);
  v[i] = 1.0f;
  return v;
}

Outcome cse_metric() {
  Outcome o;
  double uniform_err = 0;
  for (std::size_t n : {2, 3, 7, 20}) {
    std::vector<std::vector<float>> hyps(n, unit_vec(4, 0));
    const auto p = cse::synset_distribution({unit_vec(4, 1), unit_vec(4, 3)}, hyps, 0.01);
    uniform_err = std::max(uniform_err, std::abs(cse::cse_class(p) - std::log(double(n))));
  }
  o.require(uniform_err <= 1e-12, "uniform fixture");

  const std::vector<std::vector<float>> hyps{unit_vec(3, 0), unit_vec(3, 1), unit_vec(3, 2)};
  const double one_hot = cse::cse_class(cse::synset_distribution({unit_vec(3, 2)}, hyps, 0.01));
  o.require(one_hot <= 1e-6, "one-hot fixture");
  const double broad = cse::cse_class(cse::synset_distribution({unit_vec(3, 0), unit_vec(3, 1)}, hyps, 0.01));
  const double narrow = cse::cse_class(cse::synset_distribution({unit_vec(3, 0), unit_vec(3, 0)}, hyps, 0.01));
  o.require(broad > narrow, "broad set above clustered set");

  RngStream rng(77);
  std::size_t out_of_range = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.below(10), m = 1 + rng.below(6), d = 2 + rng.below(8);
    std::vector<std::vector<float>> imgs(m, std::vector<float>(d)), hs(n, std::vector<float>(d));
    for (auto* set : {&imgs, &hs})
      for (auto& v : *set)
        for (auto& x : v) x = float(rng.normal());
    const double h = cse::cse_class(cse::synset_distribution(imgs, hs, 0.01 + rng.uniform()));
    out_of_range += h < 0.0 || h > std::log(double(n)) + 1e-12;
  }
  o.require(out_of_range == 0, "range");
  o.detail << "uniform |CSE - ln N| " << fmt(uniform_err, 3) << ", one-hot " << fmt(one_hot, 3) << ", broad "
           << fmt(broad) << " > clustered " << fmt(narrow) << ", " << out_of_range << "/1000 outside [0, ln N]";
  return o;
}

Outcome persistence() {
  Outcome o;
  testing::TempDir dir("acceptance_persist");
  RngStream rng(88);
  std::size_t bad_ck = 0, bad_ds = 0, bad_emb = 0;
  for (int t = 0; t < 100; ++t) {
    nw::CheckpointFile f;
    f.config = {{"trial", t}, {"value", rng.normal()}};
    for (std::size_t r = 0, n = 1 + rng.below(4); r < n; ++r) {
      ops::Shape shape;
      for (std::size_t a = 0, rank = 1 + rng.below(4); a < rank; ++a) shape.push_back(1 + rng.below(5));
      const std::string name = "tensor" + std::to_string(r);
      if (rng.bernoulli(0.5))
        f.records.push_back(nw::record_of(name, random_tensor<float>(shape, rng, -1e4, 1e4)));
      else
        f.records.push_back(nw::record_of(name, random_tensor<double>(shape, rng, -1e-5, 1e-5)));
    }
    nw::save_checkpoint(dir / "c.hmck", f);
    const auto ck = nw::load_checkpoint(dir / "c.hmck");
    bad_ck += !(ck.records == f.records && ck.config == f.config &&
                nw::serialize_checkpoint(ck) == nw::serialize_checkpoint(f));

    cl::LabeledDataset ds;
    const std::size_t n = 1 + rng.below(8), k = 1 + rng.below(3);
    ds.images = random_tensor<float>({n, 1 + 2 * rng.below(2), 1 + rng.below(6), 1 + rng.below(6)}, rng);
    for (std::size_t c = 0; c < k; ++c) ds.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) {
      ds.labels.push_back(int(i < k ? i : rng.below(k)));
      ds.ids.push_back(std::to_string(i));
    }
    ds.rebuild_index();
    io::save_raw_dataset(dir / "d.hmds", ds);
    const auto back = io::load_raw_dataset(dir / "d.hmds");
    bad_ds += !(back.labels == ds.labels && back.images.shape() == ds.images.shape() &&
                std::memcmp(back.images.values().data(), ds.images.values().data(), ds.images.size() * sizeof(float)) == 0);

    const std::size_t dim = 1 + rng.below(12);
    cse::EmbeddingTable table(dim);
    for (std::size_t i = 0, m = rng.below(8); i < m; ++i) {
      std::vector<float> v(dim);
      for (auto& x : v) x = float(rng.normal());
      table.add("e" + std::to_string(i), v);
    }
    cse::save_embeddings(dir / "e.bin", table);
    const auto et = cse::load_embeddings(dir / "e.bin");
    bad_emb += !(et == table && cse::serialize_embeddings(et) == cse::serialize_embeddings(table));
  }
  o.require(bad_ck + bad_ds + bad_emb == 0, "roundtrip");
  o.detail << "100 payloads each, mismatches: checkpoint " << bad_ck << ", raw dataset " << bad_ds << ", embeddings "
           << bad_emb;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  const auto bytes = io::read_file(p);
  return {bytes.begin(), bytes.end()};
}

Outcome determinism(const std::string& cli) {
  Outcome o;
  testing::TempDir dir("acceptance_cli");
  auto run = [&](const std::string& args) {
    const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
    o.require(ok, "command failed: " + args.substr(0, args.find(' ')));
    return ok;
  };
  const std::string d = dir.path().string() + "/";
  if (!run("make-synthetic --out " + d + "train.hmds --per-class 6 --size 16 --seed 2")) return o;
  run("make-synthetic --out " + d + "test.hmds --per-class 6 --size 16 --seed 2 --split test");
  run("segment --data " + d + "train.hmds --out " + d + "segs.bin");
  const std::string small = " --set generator.base_channels=4 --set generator.n_down=1 --set discriminator.base_channels=4";
  std::size_t compared = 0, identical = 0;
  for (const char* tag : {"a", "b"}) {
    const std::string t = tag;
    run("train-gen --data " + d + "train.hmds --segments " + d + "segs.bin --steps 8 --seed 11" + small + " --out " +
        d + "gen_" + t + ".hmck --log " + d + "gen_" + t + ".jsonl");
    run("train-cls --train " + d + "train.hmds --test " + d + "test.hmds --segments " + d + "segs.bin --generator " + d +
        "gen_a.hmck --augment hydramix --epochs 3 --seeds 0 1 --set classifier.widths=[4,8] --out " + d +
        "cls_" + t + ".json --log " + d + "cls_" + t + ".jsonl");
  }
  for (const char* stem : {"gen_%.hmck", "gen_%.jsonl", "cls_%.json", "cls_%.jsonl"}) {
    std::string a = stem, b = stem;
    a.replace(a.find('%'), 1, "a");
    b.replace(b.find('%'), 1, "b");
    ++compared;
    const bool exists = std::filesystem::exists(d + a) && std::filesystem::exists(d + b);
    const bool same = exists && !slurp(d + a).empty() && slurp(d + a) == slurp(d + b);
    identical += same;
    o.require(same, a + " vs " + b);
  }
  o.detail << identical << "/" << compared << " output files byte-identical across two runs (train-gen and train-cls)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the hydramix library"};
  std::vector<int> only;
  std::string cli_path = HYDRAMIX_CLI;
  app.add_option("--only", only, "Run only these criteria (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--cli", cli_path, "Path of the hydramix command-line tool");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"mask properties", mask_properties},
      {"reconstruction learning", reconstruction_learning},
      {"direction of effect", direction_of_effect},
      {"mixing ratio", mixing_ratio},
      {"CSE metric", cse_metric},
      {"persistence", persistence},
      {"determinism", [&] { return determinism(cli_path); }},
  };
  std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail << "threw: " << e.what();
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[i].first
              << "): " << outcome.detail.str();
    for (std::size_t f = 0; f < outcome.failed.size(); ++f) std::cout << (f ? "; " : "; failed: ") << outcome.failed[f];
    std::cout << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
