// emoe command-line tool: synthetic data generation, mapper and content
// encoder training, translation, prediction, evaluation, PCA and retrieval.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emoe/emoe.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace emoe;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::string out;
  bool json_lines = false;
  std::string registry;
};

double sig6(double v) { return std::stod(format_number(v)); }

std::string join_numbers(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

json numbers(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(sig6(x));
  return a;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : detail::split(s, ',')) {
    auto v = detail::parse_double(part);
    if (!v) throw ValidationError("--values: '" + part + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

fs::path out_dir(const Common& c) {
  if (c.out.empty()) throw ConfigError("this command writes files and needs --out <dir>");
  fs::create_directories(c.out);
  return fs::path(c.out);
}

FormatRegistry registry_for(const Common& c, const std::vector<DatasetManifest>& manifests) {
  if (!c.registry.empty()) return load_registry(c.registry);
  for (const auto& m : manifests)
    if (!m.registry_path.empty()) return load_registry(m.registry_path);
  return default_registry();
}

void print_report(const Common& c, const EvalReport& r) {
  if (c.json_lines) {
    json scores = json::object();
    for (std::size_t i = 0; i < r.per_variable.size(); ++i)
      scores[r.variables[i]] = sig6(r.per_variable[i]);
    std::cout << json{{"dataset", r.dataset_id}, {"scenario", to_string(r.scenario)},
                      {"source", r.source},      {"format", r.format_id},
                      {"metric", to_string(r.metric)}, {"n", r.n},
                      {"per_variable", scores},  {"mean", sig6(r.aggregate)}}
                     .dump()
              << '\n';
    return;
  }
  std::cout << r.dataset_id << ' ' << to_string(r.scenario) << " (" << r.source << " -> "
            << r.format_id << ") " << to_string(r.metric) << ':';
  for (std::size_t i = 0; i < r.per_variable.size(); ++i)
    std::cout << ' ' << r.variables[i] << '=' << format_number(r.per_variable[i]);
  std::cout << " mean=" << format_number(r.aggregate) << '\n';
}

void write_results(const Common& c, std::span<const EvalReport> reports) {
  if (c.out.empty()) return;
  const fs::path p = out_dir(c) / "results.tsv";
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  write_results_table(out, reports);
}

// Loads a dataset and, optionally, the other member of its pair, splitting
// both over the union of their ids.
struct LoadedPair {
  DatasetManifest first_manifest;
  DatasetSplit first;
  std::optional<DatasetSplit> second;
};

LoadedPair load_split(const Common& c, const FormatRegistry& reg, const std::string& manifest,
                      const std::string& second_manifest) {
  LoadedPair lp;
  lp.first_manifest = load_manifest(manifest);
  const ContentDataset a = load_dataset(lp.first_manifest, reg);
  if (second_manifest.empty()) {
    lp.first = split_dataset(a, lp.first_manifest.split, c.split_seed);
    return lp;
  }
  const ContentDataset b = load_dataset(load_manifest(second_manifest), reg);
  auto [sa, sb] = split_pair(a, b, lp.first_manifest.split, c.split_seed);
  lp.first = std::move(sa);
  lp.second = std::move(sb);
  return lp;
}

// ---------------------------------------------------------------------------

int cmd_gen_synth(const Common& c, const SyntheticSpec& spec) {
  const fs::path dir = out_dir(c);
  const SyntheticPair syn = generate_synthetic_pair(spec);
  {
    std::ofstream r(dir / "registry.txt");
    if (!r) throw IoError("cannot write " + (dir / "registry.txt").string());
    write_registry(r, syn.registry);
  }
  write_embedding_table((dir / "features.txt").string(), syn.first.ids, syn.first.features);
  for (const ContentDataset* ds : {&syn.first, &syn.second}) {
    write_lexicon((dir / (ds->id + ".csv")).string(), *ds, syn.registry);
    const auto& f = syn.registry.find(ds->format_id);
    DatasetManifest m;
    m.id = ds->id;
    m.domain = ds->domain;
    m.format_id = ds->format_id;
    m.data_path = ds->id + ".csv";
    m.features_path = "features.txt";
    m.registry_path = "registry.txt";
    for (const auto& v : f.variables()) m.scales.push_back({v, f.range().lo, f.range().hi});
    write_manifest((dir / (ds->id + ".manifest")).string(), m);
  }
  {
    std::ofstream s(dir / "suite.manifest");
    s << "registry = registry.txt\npair = " << syn.first.id << ".manifest " << syn.second.id
      << ".manifest\n";
  }
  if (c.json_lines)
    std::cout << json{{"items", spec.n}, {"sigma", sig6(spec.sigma)}, {"dir", dir.string()}}.dump()
              << '\n';
  else
    std::cout << "wrote " << spec.n << " synthetic items to " << dir.string() << '\n';
  return 0;
}

struct MapperFlags {
  std::vector<std::string> pairs;
  std::size_t steps = 10000;
  std::size_t batch = 32;
  std::size_t dim = 100;
  std::size_t log_every = 500;
  double w_para = 1.0;
  double lr = 1e-3;
};

std::pair<std::string, std::string> split_pair_arg(const std::string& s) {
  const auto parts = detail::split(s, ',');
  if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
    throw ConfigError("--pair expects '<manifest>,<manifest>', got '" + s + "'");
  return {parts[0], parts[1]};
}

int cmd_train_mapper(const Common& c, const MapperFlags& f) {
  const fs::path dir = out_dir(c);
  std::vector<std::pair<DatasetManifest, DatasetManifest>> ms;
  std::vector<DatasetManifest> flat;
  for (const auto& p : f.pairs) {
    auto [a, b] = split_pair_arg(p);
    ms.emplace_back(load_manifest(a), load_manifest(b));
    flat.push_back(ms.back().first);
    flat.push_back(ms.back().second);
  }
  const FormatRegistry reg = registry_for(c, flat);
  std::vector<MappingDataset> train;
  for (const auto& [ma, mb] : ms) {
    const ContentDataset a = load_label_table(ma.data_path, ma, reg);
    const ContentDataset b = load_label_table(mb.data_path, mb, reg);
    auto [sa, sb] = split_pair(a, b, ma.split, c.split_seed);
    train.push_back(make_mapping_dataset(ma.id + "~" + mb.id, sa.train, sb.train));
    if (train.back().size() == 0)
      throw ValidationError("datasets " + ma.id + " and " + mb.id + " share no training items");
  }
  MapperTrainConfig cfg;
  cfg.architecture.embedding_dim = f.dim;
  cfg.n_steps = f.steps;
  cfg.batch_size = f.batch;
  cfg.objectives.para = f.w_para;
  cfg.optimizer.learning_rate = f.lr;
  cfg.seed = c.seed;
  cfg.log_every = f.log_every;
  cfg.on_log = [&](const MapperStepLog& l) {
    if (c.json_lines)
      std::cout << json{{"step", l.step},           {"l_map", sig6(l.l_map)},
                        {"l_auto", sig6(l.l_auto)}, {"l_sim", sig6(l.l_sim)},
                        {"l_para", sig6(l.l_para)}}
                       .dump()
                << '\n';
    else
      std::cout << format_log_line(l) << '\n';
  };
  const MultiWayMapper mapper = train_mapper(train, reg, cfg);
  const fs::path model = dir / "model.emoe";
  save_model(model.string(), mapper);
  if (!c.json_lines) std::cout << "saved " << model.string() << '\n';
  return 0;
}

struct EncoderFlags {
  std::string model;
  std::string manifest;
  std::string second;
  std::string mode = "augmented";
  std::vector<std::string> augment;
  std::size_t epochs = 100;
  std::size_t batch = 32;
  std::size_t patience = 10;
  double lr = 1e-3;
};

int cmd_train_encoder(const Common& c, const EncoderFlags& f) {
  const fs::path dir = out_dir(c);
  ModelBundle bundle = load_model(f.model);
  const auto& reg = bundle.mapper.registry();
  LoadedPair lp = load_split(c, reg, f.manifest, f.second);
  EncoderTrainConfig cfg;
  cfg.mode = parse_encoder_mode(f.mode);
  cfg.n_epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.patience = f.patience;
  cfg.optimizer.learning_rate = f.lr;
  cfg.seed = c.seed;
  cfg.augmentation_formats = f.augment;
  if (cfg.mode == EncoderMode::augmented && cfg.augmentation_formats.empty()) {
    if (!lp.second)
      throw ConfigError("augmented mode needs --augment-format or --second <manifest>");
    cfg.augmentation_formats = {lp.second->train.format_id};
  }
  if (cfg.mode == EncoderMode::multitask && !lp.second)
    throw ConfigError("multitask mode needs --second <manifest>");
  cfg.on_epoch = [&](const EncoderEpochLog& l) {
    if (c.json_lines)
      std::cout << json{{"epoch", l.epoch}, {"train_loss", sig6(l.train_loss)},
                        {"dev_loss", std::isfinite(l.dev_loss) ? json(sig6(l.dev_loss)) : json()}}
                       .dump()
                << '\n';
    else
      std::cout << "epoch=" << l.epoch << " train_loss=" << format_number(l.train_loss)
                << " dev_loss=" << format_number(l.dev_loss) << '\n';
  };
  const ContentDataset* dev = lp.first.dev.size() > 0 ? &lp.first.dev : nullptr;
  ContentEncoder enc = train_content_encoder(
      {&lp.first.train, dev, lp.second ? &lp.second->train : nullptr}, bundle.mapper, cfg);
  std::erase_if(bundle.encoders, [&](const ContentEncoder& e) { return e.name == enc.name; });
  bundle.encoders.push_back(std::move(enc));
  const fs::path model = dir / "model.emoe";
  save_model(model.string(), bundle.mapper, bundle.encoders);
  if (!c.json_lines) std::cout << "saved " << model.string() << '\n';
  return 0;
}

int cmd_translate(const Common& c, const std::string& model, const std::string& in,
                  const std::string& out, const std::string& values) {
  const ModelBundle bundle = load_model(model);
  const EmotionLabel y = translate(bundle.mapper, {in, parse_values(values)}, out);
  if (c.json_lines) {
    json o = json::object();
    const auto& f = bundle.mapper.registry().find(out);
    for (std::size_t i = 0; i < y.values.size(); ++i) o[f.variables()[i]] = sig6(y.values[i]);
    std::cout << json{{"format", out}, {"values", o}}.dump() << '\n';
  } else {
    std::cout << join_numbers(y.values) << '\n';
  }
  return 0;
}

const ContentEncoder& encoder_named(const ModelBundle& b, const std::string& name) {
  const ContentEncoder* e = b.find_encoder(name);
  if (e == nullptr) {
    std::string names;
    for (const auto& x : b.encoders) names += (names.empty() ? "" : ", ") + x.name;
    throw ValidationError("model has no content encoder named '" + name + "' (available: " +
                          (names.empty() ? "none" : names) + ")");
  }
  return *e;
}

int cmd_predict(const Common& c, const std::string& model, const std::string& manifest,
                const std::string& encoder, const std::string& format) {
  const ModelBundle bundle = load_model(model);
  const auto& reg = bundle.mapper.registry();
  const DatasetManifest m = load_manifest(manifest);
  const ContentDataset ds = load_dataset(m, reg);
  const ContentEncoder& enc = encoder_named(bundle, encoder.empty() ? m.id : encoder);
  const std::string fmt = format.empty() ? ds.format_id : format;
  const Matrix pred = predict_batch(enc, bundle.mapper, ds.features, fmt);
  const auto& f = reg.find(fmt);
  std::ofstream file;
  if (!c.out.empty()) {
    const fs::path p = out_dir(c) / "predictions.csv";
    file.open(p);
    if (!file) throw IoError("cannot write " + p.string());
    file << "id";
    for (const auto& v : f.variables()) file << ',' << v;
    file << '\n';
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = pred.row(i);
    if (c.json_lines)
      std::cout << json{{"id", ds.ids[i]}, {"format", fmt}, {"values", numbers(row)}}.dump()
                << '\n';
    else
      std::cout << ds.ids[i] << ' ' << join_numbers(row) << '\n';
    if (file) file << detail::csv_field(ds.ids[i]) << ',' << join_numbers(row) << '\n';
  }
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& model, const std::string& scenario_s,
                 const std::string& manifest, const std::string& second,
                 const std::string& encoder) {
  const Scenario scenario = parse_scenario(scenario_s);
  const ModelBundle bundle = load_model(model);
  const auto& reg = bundle.mapper.registry();
  if (scenario != Scenario::supervised && second.empty())
    throw ConfigError(std::string(to_string(scenario)) + " evaluation needs --second <manifest>");
  LoadedPair lp = load_split(c, reg, manifest, second);
  std::vector<EvalReport> reports;
  switch (scenario) {
  case Scenario::supervised:
    reports.push_back(evaluate_supervised(
        encoder_named(bundle, encoder.empty() ? lp.first.test.id : encoder), bundle.mapper,
        lp.first.test));
    break;
  case Scenario::zero_shot:
    reports.push_back(evaluate_zero_shot(
        encoder_named(bundle, encoder.empty() ? lp.second->test.id : encoder), bundle.mapper,
        lp.first.test));
    break;
  case Scenario::mapping: {
    const MappingDataset md = make_mapping_dataset(lp.first.test.id + "~" + lp.second->test.id,
                                                   lp.first.test, lp.second->test);
    reports.push_back(evaluate_mapping(bundle.mapper, md, false));
    reports.push_back(evaluate_mapping(bundle.mapper, md, true));
    break;
  }
  }
  for (const auto& r : reports) print_report(c, r);
  write_results(c, reports);
  return 0;
}

int cmd_analyze_pca(const Common& c, const std::string& model, std::size_t k) {
  const ModelBundle bundle = load_model(model);
  const auto [pca, points] = head_row_pca(bundle.mapper, k);
  for (const auto& p : points) {
    if (c.json_lines)
      std::cout << json{{"label", p.label}, {"coords", numbers(p.coords)}}.dump() << '\n';
    else
      std::cout << p.label << ' ' << join_numbers(p.coords) << '\n';
  }
  if (!c.json_lines)
    std::cout << "explained_variance " << join_numbers(pca.explained_variance) << '\n';
  if (!c.out.empty()) {
    const fs::path p = out_dir(c) / "pca.csv";
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    write_pca_csv(out, points);
  }
  return 0;
}

int cmd_retrieve(const Common& c, const std::string& model,
                 const std::vector<std::string>& manifests, const std::string& query,
                 const std::string& query_dataset, const std::string& in, std::size_t top) {
  const ModelBundle bundle = load_model(model);
  const auto& reg = bundle.mapper.registry();
  std::vector<ContentDataset> datasets;
  for (const auto& m : manifests) datasets.push_back(load_dataset(load_manifest(m), reg));
  const RetrievalIndex index = build_index(bundle.mapper, bundle.encoders, datasets);
  const std::string qds = query_dataset.empty() ? datasets.front().id : query_dataset;
  const IndexEntry* q = index.find(qds, query);
  if (q == nullptr)
    throw ValidationError("query '" + query + "' not found in dataset " + qds);
  bool known = false;
  for (const auto& d : datasets) known |= d.id == in;
  if (!known) throw ValidationError("--in names unknown dataset '" + in + "'");
  std::size_t rank = 0;
  for (const auto& hit : query_top_k(index, q->embedding, top, in)) {
    ++rank;
    if (c.json_lines)
      std::cout << json{{"rank", rank},
                        {"id", hit.entry->id},
                        {"text", hit.entry->text},
                        {"dataset", hit.entry->dataset_id},
                        {"similarity", sig6(hit.similarity)}}
                       .dump()
                << '\n';
    else
      std::cout << rank << ' ' << hit.entry->text << ' ' << format_number(hit.similarity) << '\n';
  }
  if (!c.out.empty()) save_index((out_dir(c) / "index.emix").string(), index);
  return 0;
}

int cmd_run_suite(const Common& c, const std::string& suite_path, const MapperFlags& mf,
                  const EncoderFlags& ef) {
  const fs::path dir = out_dir(c);
  const SuiteManifest suite = load_suite_manifest(suite_path);
  const FormatRegistry reg =
      !c.registry.empty()           ? load_registry(c.registry)
      : !suite.registry_path.empty() ? load_registry(suite.registry_path)
                                     : default_registry();
  std::vector<DatasetPair> pairs;
  for (const auto& [a, b] : suite.pairs) {
    const DatasetManifest ma = load_manifest(a), mb = load_manifest(b);
    pairs.push_back({load_dataset(ma, reg), load_dataset(mb, reg), ma.split});
  }
  SuiteConfig cfg;
  cfg.split_seed = c.split_seed;
  cfg.mapper.architecture.embedding_dim = mf.dim;
  cfg.mapper.n_steps = mf.steps;
  cfg.mapper.batch_size = mf.batch;
  cfg.mapper.objectives.para = mf.w_para;
  cfg.mapper.optimizer.learning_rate = mf.lr;
  cfg.mapper.seed = c.seed;
  cfg.encoder.mode = parse_encoder_mode(ef.mode);
  cfg.encoder.n_epochs = ef.epochs;
  cfg.encoder.batch_size = ef.batch;
  cfg.encoder.patience = ef.patience;
  cfg.encoder.optimizer.learning_rate = ef.lr;
  cfg.encoder.seed = c.seed;
  const SuiteResult res = run_suite(pairs, reg, cfg);
  for (const auto& r : res.reports) print_report(c, r);
  write_results(c, res.reports);
  save_model((dir / "model.emoe").string(), res.mapper, res.encoders);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-way emotion label mapping: train, translate, predict, evaluate"};
  app.require_subcommand(1);
  Common c;
  auto common = [&](CLI::App* s, bool writes) {
    s->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    s->add_option("--split-seed", c.split_seed, "Seed of the train/dev/test split")
        ->capture_default_str();
    s->add_option("--out", c.out, writes ? "Output directory" : "Optional output directory");
    s->add_flag("--json-lines", c.json_lines, "Print one JSON object per result line");
  };

  SyntheticSpec spec;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic dataset pair and its manifests");
  common(gen, true);
  gen->add_option("--n", spec.n, "Number of items")->capture_default_str();
  gen->add_option("--sigma", spec.sigma, "Label noise")->capture_default_str();
  gen->add_option("--feature-width", spec.feature_width)->capture_default_str();
  gen->add_option("--feature-noise", spec.feature_noise)->capture_default_str();

  MapperFlags mf;
  auto mapper_opts = [&](CLI::App* s) {
    s->add_option("--steps", mf.steps, "Training steps")->capture_default_str();
    s->add_option("--batch-size", mf.batch)->capture_default_str();
    s->add_option("--dim", mf.dim, "Emotion embedding dimension")->capture_default_str();
    s->add_option("--para-weight", mf.w_para, "Weight of the head-row sharing loss")
        ->capture_default_str();
    s->add_option("--lr", mf.lr)->capture_default_str();
    s->add_option("--registry", c.registry, "Label format registry file");
  };
  auto* tm = app.add_subcommand("train-mapper", "Train the label mapping model");
  common(tm, true);
  mapper_opts(tm);
  tm->add_option("--pair", mf.pairs, "Two dataset manifests, comma-separated (repeatable)")
      ->required();
  tm->add_option("--log-every", mf.log_every)->capture_default_str();

  EncoderFlags ef;
  auto encoder_opts = [&](CLI::App* s) {
    s->add_option("--mode", ef.mode, "augmented | plain | multitask")
        ->check(CLI::IsMember({"augmented", "plain", "multitask"}))
        ->capture_default_str();
    s->add_option("--epochs", ef.epochs)->capture_default_str();
    s->add_option("--encoder-batch-size", ef.batch)->capture_default_str();
    s->add_option("--patience", ef.patience)->capture_default_str();
    s->add_option("--encoder-lr", ef.lr)->capture_default_str();
  };
  auto* te = app.add_subcommand("train-encoder", "Train a content encoder against a model");
  common(te, true);
  encoder_opts(te);
  te->add_option("--model", ef.model)->required();
  te->add_option("--manifest", ef.manifest, "Dataset to train on")->required();
  te->add_option("--second", ef.second, "Other dataset of the pair");
  te->add_option("--augment-format", ef.augment, "Augmentation format (repeatable)");

  std::string model, fmt_in, fmt_out, values;
  auto* tr = app.add_subcommand("translate", "Translate a label between formats");
  common(tr, false);
  tr->add_option("--model", model)->required();
  tr->add_option("--format-in", fmt_in)->required();
  tr->add_option("--format-out", fmt_out)->required();
  tr->add_option("--values", values, "Comma-separated label values")->required();

  std::string manifest, second, encoder, format;
  auto* pr = app.add_subcommand("predict", "Predict labels for a dataset");
  common(pr, false);
  pr->add_option("--model", model)->required();
  pr->add_option("--manifest", manifest)->required();
  pr->add_option("--encoder", encoder, "Encoder name (default: dataset id)");
  pr->add_option("--format", format, "Output format (default: dataset format)");

  std::string scenario = "supervised";
  auto* ev = app.add_subcommand("evaluate", "Score a model on held-out data");
  common(ev, false);
  ev->add_option("--model", model)->required();
  ev->add_option("--scenario", scenario)
      ->check(CLI::IsMember({"supervised", "zero-shot", "mapping"}))
      ->capture_default_str();
  ev->add_option("--manifest", manifest, "Dataset evaluated")->required();
  ev->add_option("--second", second, "Other dataset of the pair");
  ev->add_option("--encoder", encoder, "Encoder name override");

  std::size_t k = 2;
  auto* pca = app.add_subcommand("analyze-pca", "PCA of the unit-normalized head rows");
  common(pca, false);
  pca->add_option("--model", model)->required();
  pca->add_option("--components", k)->capture_default_str();

  std::vector<std::string> manifests;
  std::string query, query_ds, in;
  std::size_t top = 10;
  auto* rt = app.add_subcommand("retrieve", "Emotionally closest items to a query");
  common(rt, false);
  rt->add_option("--model", model)->required();
  rt->add_option("--manifest", manifests, "Datasets to index (repeatable)")->required();
  rt->add_option("--query", query, "Query token")->required();
  rt->add_option("--query-dataset", query_ds, "Dataset the query is looked up in");
  rt->add_option("--in", in, "Dataset to search")->required();
  rt->add_option("--top", top)->capture_default_str();

  std::string suite;
  auto* rs = app.add_subcommand("run-suite", "Train and evaluate over a suite of dataset pairs");
  common(rs, true);
  mapper_opts(rs);
  encoder_opts(rs);
  rs->add_option("--suite", suite, "Suite manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  std::cout.precision(6);
  try {
    if (*gen) return cmd_gen_synth(c, spec);
    if (*tm) return cmd_train_mapper(c, mf);
    if (*te) return cmd_train_encoder(c, ef);
    if (*tr) return cmd_translate(c, model, fmt_in, fmt_out, values);
    if (*pr) return cmd_predict(c, model, manifest, encoder, format);
    if (*ev) return cmd_evaluate(c, model, scenario, manifest, second, encoder);
    if (*pca) return cmd_analyze_pca(c, model, k);
    if (*rt) return cmd_retrieve(c, model, manifests, query, query_ds, in, top);
    if (*rs) return cmd_run_suite(c, suite, mf, ef);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.category() == ErrorCategory::validation ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
