#include "qtag/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qtag/datagen.hpp"
#include "qtag/dataset_io.hpp"
#include "qtag/model_io.hpp"
#include "qtag/parallel.hpp"
#include "qtag/preprocess.hpp"
#include "qtag/service.hpp"

namespace qtag {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v, std::size_t line) {
  std::istringstream ss(v);
  T out{};
  if (!(ss >> out) || !(ss >> std::ws).eof())
    throw ValidationError("config line " + std::to_string(line) + ": bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config line " + std::to_string(line) + ": bad boolean for " + key + ": '" + v + "'");
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_lines(in);
}

void add_train_options(CLI::App* sub, TrainConfig& tc, ModelDims& dims, bool& no_char, bool& no_crf) {
  sub->add_option("--epochs", tc.max_epochs, "maximum epochs")->capture_default_str();
  sub->add_option("--patience", tc.patience, "early-stopping patience")->capture_default_str();
  sub->add_option("--batch", tc.batch_size, "mini-batch size")->capture_default_str();
  sub->add_option("--lr", tc.lr, "SGD learning rate")->capture_default_str();
  sub->add_option("--clip", tc.clip, "gradient norm clip")->capture_default_str();
  sub->add_option("--word-dropout", tc.word_dropout, "probability of replacing a word by UNK")
      ->capture_default_str();
  sub->add_option("--word-emb", dims.word_emb, "word embedding size")->capture_default_str();
  sub->add_option("--char-emb", dims.char_emb, "character embedding size")->capture_default_str();
  sub->add_option("--char-hidden", dims.char_hidden, "char LSTM size per direction")->capture_default_str();
  sub->add_option("--word-hidden", dims.word_hidden, "word GRU size per direction")->capture_default_str();
  sub->add_flag("--no-char", no_char, "disable character features");
  sub->add_flag("--no-crf", no_crf, "softmax output with BIO repair instead of a CRF");
}

Catalog load_catalog(const std::string& brands, const std::string& pts) {
  return read_catalog(brands, pts);
}

void print_response(const TagResponse& r) { std::cout << r.to_json() << '\n'; }

}  // namespace

RunConfig parse_run_config(std::istream& in, RunConfig cfg) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    auto num = [&]<class T>(T& field) { field = parse_number<T>(key, v, line_no); };
    auto flag = [&](bool& field) { field = parse_bool(key, v, line_no); };

    if (key == "growth_factor") num(cfg.loop.growth_factor);
    else if (key == "synthetic_fraction") num(cfg.loop.synthetic_fraction);
    else if (key == "max_iterations") num(cfg.loop.max_iterations);
    else if (key == "seed") num(cfg.loop.seed);
    else if (key == "warm_start") flag(cfg.loop.warm_start);
    else if (key == "select_on") {
      if (v == "test") cfg.loop.select_on = SelectionMetric::TestF1;
      else if (v == "dev") cfg.loop.select_on = SelectionMetric::DevF1;
      else throw ValidationError("config line " + std::to_string(line_no) + ": select_on must be test or dev");
    }
    else if (key == "max_epochs") num(cfg.train.max_epochs);
    else if (key == "patience") num(cfg.train.patience);
    else if (key == "batch_size") num(cfg.train.batch_size);
    else if (key == "lr") num(cfg.train.lr);
    else if (key == "clip") num(cfg.train.clip);
    else if (key == "word_dropout") num(cfg.train.word_dropout);
    else if (key == "shuffle_seed") num(cfg.train.shuffle_seed);
    else if (key == "parallel") flag(cfg.train.parallel);
    else if (key == "word_emb") num(cfg.dims.word_emb);
    else if (key == "char_emb") num(cfg.dims.char_emb);
    else if (key == "char_hidden") num(cfg.dims.char_hidden);
    else if (key == "word_hidden") num(cfg.dims.word_hidden);
    else if (key == "use_char") flag(cfg.flags.use_char_embedding);
    else if (key == "use_crf") flag(cfg.flags.use_crf);
    else if (key == "split_seed") num(cfg.split_seed);
    else if (key == "init_seed") num(cfg.init_seed);
    else if (key == "baseline") flag(cfg.run_baseline);
    else throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.loop.validate();
  cfg.train.validate();
  cfg.dims.validate();
  return cfg;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Brand and product-type tagger for search queries"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kServiceVersion);

  std::uint64_t seed = 42;
  auto with_seed = [&seed](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed")->capture_default_str();
    return sub;
  };

  // gen-miniworld
  MiniWorldConfig mw;
  std::string mw_out;
  auto* gen_mw = with_seed(app.add_subcommand("gen-miniworld", "generate a seeded synthetic catalog and datasets"));
  gen_mw->add_option("--out-dir", mw_out, "output directory")->required();
  gen_mw->add_option("--brands", mw.n_brands)->capture_default_str();
  gen_mw->add_option("--product-types", mw.n_product_types)->capture_default_str();
  gen_mw->add_option("--golden", mw.n_golden)->capture_default_str();
  gen_mw->add_option("--noisy", mw.n_noisy)->capture_default_str();
  gen_mw->add_option("--synthetic", mw.n_synthetic)->capture_default_str();
  gen_mw->add_option("--noise-rate", mw.noise_rate)->capture_default_str();
  gen_mw->add_option("--ambiguity", mw.ambiguity_rate, "fraction of entries shared by both lists")
      ->capture_default_str();

  // gen-synthetic / gen-noisy share catalog flags
  std::string brands_path, pts_path, out_path, in_path;
  auto catalog_flags = [&](CLI::App* sub) {
    sub->add_option("--brand-list", brands_path, "brand list, one per line")->required();
    sub->add_option("--product-type-list", pts_path, "product type list, one per line")->required();
  };
  auto* gen_syn = with_seed(app.add_subcommand("gen-synthetic", "one single-entity query per catalog entry"));
  catalog_flags(gen_syn);
  gen_syn->add_option("--out", out_path)->required();

  double noise_rate = 0.0;
  auto* gen_noisy = with_seed(app.add_subcommand("gen-noisy", "distant-label raw queries, optionally corrupted"));
  catalog_flags(gen_noisy);
  gen_noisy->add_option("--queries", in_path, "raw queries, one per line")->required();
  gen_noisy->add_option("--noise-rate", noise_rate)->capture_default_str();
  gen_noisy->add_option("--out", out_path)->required();

  std::size_t sample_n = 0;
  auto* sample = with_seed(app.add_subcommand("sample", "pattern-stratified sample of a dataset"));
  sample->add_option("--in", in_path)->required();
  sample->add_option("--n", sample_n)->required();
  sample->add_option("--out", out_path, "output dataset (stdout if omitted)");

  // train
  TrainConfig tc;
  ModelDims dims;
  bool no_char = false, no_crf = false, lenient = false;
  std::string train_path, dev_path, emb_path, model_path;
  int threads = 0;
  auto* train = with_seed(app.add_subcommand("train", "train a tagger on golden-format datasets"));
  train->add_option("--train", train_path)->required();
  train->add_option("--dev", dev_path)->required();
  train->add_option("--out", model_path, "model file to write")->required();
  train->add_option("--embeddings", emb_path, "pretrained word vectors (text)");
  train->add_option("--brand-list", brands_path, "catalog used for the model fingerprint");
  train->add_option("--product-type-list", pts_path);
  train->add_option("--threads", threads, "OpenMP threads (0 = default)");
  train->add_flag("--lenient", lenient, "repair orphan I- tags on read");
  add_train_options(train, tc, dims, no_char, no_crf);

  // triplelearn
  std::string golden_path, noisy_path, syn_path, config_path, report_path;
  auto* tl = with_seed(app.add_subcommand("triplelearn", "iterative training on golden, noisy and synthetic data"));
  tl->add_option("--golden", golden_path)->required();
  tl->add_option("--noisy", noisy_path)->required();
  tl->add_option("--synthetic", syn_path)->required();
  catalog_flags(tl);
  tl->add_option("--config", config_path, "key = value config file");
  tl->add_option("--out", model_path, "best model file")->required();
  tl->add_option("--report", report_path, "append one JSON line per iteration here");
  tl->add_option("--threads", threads);

  // eval
  std::string pred_path, gold_path;
  auto* eval = with_seed(app.add_subcommand("eval", "exact-match span F1"));
  eval->add_option("--gold", gold_path)->required();
  auto* eval_pred = eval->add_option("--pred", pred_path, "predicted dataset");
  eval->add_option("--model", model_path, "tag the gold queries with this model")->excludes(eval_pred);
  eval->add_flag("--lenient", lenient);

  // tag
  std::string query;
  std::size_t max_tokens = 32;
  auto* tag = with_seed(app.add_subcommand("tag", "tag queries with a trained model"));
  tag->add_option("--model", model_path)->required();
  tag->add_option("--query", query, "raw query; reads one query per line from stdin if omitted");
  tag->add_option("--max-tokens", max_tokens)->capture_default_str();

  auto* btag = with_seed(app.add_subcommand("baseline-tag", "legacy greedy catalog matcher"));
  catalog_flags(btag);
  btag->add_option("--query", query, "raw query; reads stdin if omitted");
  btag->add_option("--eval", gold_path, "score the matcher on this dataset instead");

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = with_seed(app.add_subcommand("serve", "HTTP tagging service"));
  serve->add_option("--model", model_path)->required();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--max-tokens", max_tokens)->capture_default_str();

  // inspect-emb
  std::size_t emb_dims = 100, k = 3;
  std::string word, vocab_path;
  auto* inspect = with_seed(app.add_subcommand("inspect-emb", "embedding neighbors and vocabulary coverage"));
  inspect->add_option("--embeddings", emb_path)->required();
  inspect->add_option("--dims", emb_dims)->capture_default_str();
  inspect->add_option("--word", word, "print nearest neighbors of this word");
  inspect->add_option("--k", k)->capture_default_str();
  inspect->add_option("--vocab-from", vocab_path, "dataset whose vocabulary coverage is reported");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads > 0) set_threads(threads);

    if (*gen_mw) {
      mw.seed = seed;
      const MiniWorld world = generate_miniworld(mw);
      const std::filesystem::path dir(mw_out);
      std::filesystem::create_directories(dir);
      write_entity_list(dir / "brands.txt", world.catalog.brands);
      write_entity_list(dir / "product_types.txt", world.catalog.product_types);
      write_dataset(dir / "golden.tsv", world.golden);
      write_dataset(dir / "noisy.tsv", world.noisy);
      write_dataset(dir / "synthetic.tsv", world.synthetic);
      std::cout << "wrote " << world.golden.size() << " golden, " << world.noisy.size() << " noisy, "
                << world.synthetic.size() << " synthetic queries to " << dir.string() << '\n';
    } else if (*gen_syn) {
      write_dataset(out_path, generate_synthetic(load_catalog(brands_path, pts_path)));
    } else if (*gen_noisy) {
      const Catalog catalog = load_catalog(brands_path, pts_path);
      std::vector<Tokens> queries;
      for (const auto& line : read_lines(in_path)) {
        try {
          queries.push_back(normalize_query(line));
        } catch (const EmptyQueryError&) {
        }
      }
      write_dataset(out_path, label_noisy(queries, catalog, noise_rate, seed));
    } else if (*sample) {
      const Dataset picked = stratified_sample(read_dataset(in_path), sample_n, seed);
      if (out_path.empty()) write_dataset(std::cout, picked);
      else write_dataset(out_path, picked);
    } else if (*train) {
      tc.shuffle_seed = seed;
      const Dataset tr = read_dataset(train_path, lenient), dv = read_dataset(dev_path, lenient);
      std::optional<EmbeddingTable> emb;
      if (!emb_path.empty()) emb = load_embeddings(emb_path, dims.word_emb);
      const ModelFlags flags{!no_char, !no_crf};
      Model m = init_params(dims, Vocab::build({&tr}), emb ? &*emb : nullptr, seed, flags);
      if (emb) std::cerr << "embedding coverage " << vocab_coverage(*emb, m.vocab.words()) << "%\n";
      if (!brands_path.empty() && !pts_path.empty())
        m.catalog_fingerprint = catalog_fingerprint(load_catalog(brands_path, pts_path));
      const auto fp = m.catalog_fingerprint;
      TrainResult res = train_model(tr, dv, std::move(m), tc, [](std::size_t e, double loss, const EvalReport& r) {
        std::fprintf(stderr, "epoch %zu loss %.5f dev F1 %.2f\n", e, loss, r.f1());
      });
      res.best.catalog_fingerprint = fp;
      save_model(res.best, model_path);
      std::cout << "best epoch " << res.best_epoch << " dev F1 "
                << res.history[res.best_epoch - 1].f1() << '\n';
    } else if (*tl) {
      RunConfig rc;
      rc.loop.seed = seed;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw FormatError("cannot open config " + config_path);
        rc = parse_run_config(in, rc);
      }
      const Catalog catalog = load_catalog(brands_path, pts_path);
      const GoldenSplit split = split_golden(read_dataset(golden_path), rc.split_seed);
      const Dataset noisy = read_dataset(noisy_path), syn = read_dataset(syn_path);
      NeuralLearner learner(rc.dims, rc.flags, rc.train, rc.init_seed);
      std::ofstream report;
      if (!report_path.empty()) {
        report.open(report_path, std::ios::app);
        if (!report) throw FormatError("cannot open report " + report_path);
      }
      auto res = run_triplelearn(split, noisy, syn, ambiguous_lexicon(catalog), catalog, rc.loop, learner,
                                 [&](const IterationReport& r) {
                                   const std::string line = format_iteration_record(r);
                                   std::cout << line << std::endl;
                                   if (report) report << line << std::endl;
                                 });
      res.best.catalog_fingerprint = catalog_fingerprint(catalog);
      save_model(res.best, model_path);
      std::cout << format_iteration_table(res.reports) << "best iteration " << res.best_iteration
                << " (" << res.stop_reason << ")\n";
      if (rc.run_baseline) {
        const auto b = one_pass_baseline(split, noisy, syn, ambiguous_lexicon(catalog), rc.loop, learner);
        std::cout << "one-pass baseline test F1 " << b.test.f1() << '\n';
      }
    } else if (*eval) {
      const Dataset gold = read_dataset(gold_path, lenient);
      EvalReport r;
      if (!model_path.empty()) {
        r = evaluate_model(load_model(std::filesystem::path(model_path)), gold, true);
      } else if (!pred_path.empty()) {
        r = evaluate_f1(read_dataset(pred_path, lenient).items, gold.items);
      } else {
        throw ValidationError("eval needs --pred or --model");
      }
      std::cout << format_report_table(r) << format_report_record(r) << '\n';
    } else if (*tag) {
      const Model m = load_model(std::filesystem::path(model_path));
      ServiceConfig sc;
      sc.max_tokens = max_tokens;
      if (!query.empty()) {
        print_response(tag_query(m, query, sc));
      } else {
        for (const auto& line : read_lines(std::cin)) {
          try {
            print_response(tag_query(m, line, sc));
          } catch (const EmptyQueryError&) {
          }
        }
      }
    } else if (*btag) {
      const Catalog catalog = load_catalog(brands_path, pts_path);
      if (!gold_path.empty()) {
        const Dataset gold = read_dataset(gold_path);
        std::vector<Labels> pred, ref;
        for (const auto& q : gold.items) {
          pred.push_back(distant_label(q.tokens, catalog).labels);
          ref.push_back(q.labels);
        }
        const EvalReport r = evaluate_f1(pred, ref);
        std::cout << format_report_table(r) << format_report_record(r) << '\n';
      } else {
        auto emit = [&](const std::string& raw) {
          const TaggedQuery q = distant_label(normalize_query(raw), catalog);
          for (std::size_t i = 0; i < q.tokens.size(); ++i)
            std::cout << q.tokens[i] << '\t' << to_string(q.labels[i]) << '\n';
          std::cout << '\n';
        };
        if (!query.empty()) emit(query);
        else
          for (const auto& line : read_lines(std::cin))
            if (!trim(line).empty()) emit(line);
      }
    } else if (*serve) {
      ServiceConfig sc;
      sc.max_tokens = max_tokens;
      const TagService service(load_model(std::filesystem::path(model_path)), sc);
      TagServer server(service);
      const int bound = server.bind(host, port);
      std::cerr << "listening on " << host << ':' << bound << std::endl;
      server.run();
    } else if (*inspect) {
      const EmbeddingTable table = load_embeddings(std::filesystem::path(emb_path), emb_dims);
      std::cout << table.words.size() << " vectors of dimension " << table.dim << '\n';
      if (!vocab_path.empty()) {
        const Dataset d = read_dataset(vocab_path, true);
        std::printf("vocab. coverage %.1f%%\n", vocab_coverage(table, Vocab::build({&d}).words()));
      }
      if (!word.empty())
        for (const auto& n : nearest_neighbors(table, word, k)) std::printf("%s\t%.6f\n", n.word.c_str(), n.cosine);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace qtag
