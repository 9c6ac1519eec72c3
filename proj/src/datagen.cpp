#include "qtag/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "qtag/preprocess.hpp"

namespace qtag {

AmbiguousLexicon ambiguous_lexicon(const Catalog& catalog) {
  AmbiguousLexicon lex;
  std::set_intersection(catalog.brands.begin(), catalog.brands.end(),
                        catalog.product_types.begin(), catalog.product_types.end(),
                        std::inserter(lex.entries, lex.entries.end()));
  return lex;
}

namespace {

std::size_t max_entry_tokens(const std::set<std::string>& entries) {
  std::size_t best = 0;
  for (const auto& e : entries)
    best = std::max<std::size_t>(best, std::count(e.begin(), e.end(), ' ') + 1);
  return best;
}

void greedy_pass(const Tokens& tokens, const std::set<std::string>& entries, EntityType type,
                 Labels& labels) {
  const std::size_t n = tokens.size();
  const std::size_t max_len = max_entry_tokens(entries);
  for (std::size_t i = 0; i < n;) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(max_len, n - i); len >= 1 && !matched; --len) {
      bool free = true;
      for (std::size_t k = i; k < i + len; ++k) free = free && labels[k] == Label::O;
      if (!free) continue;
      std::string phrase = tokens[i];
      for (std::size_t k = i + 1; k < i + len; ++k) phrase += ' ' + tokens[k];
      if (entries.contains(phrase)) matched = len;
    }
    if (matched) {
      labels[i] = begin_of(type);
      for (std::size_t k = i + 1; k < i + matched; ++k) labels[k] = inside_of(type);
      i += matched;
    } else {
      ++i;
    }
  }
}

}  // namespace

TaggedQuery distant_label(const Tokens& tokens, const Catalog& catalog) {
  if (tokens.empty()) throw ValidationError("empty query");
  TaggedQuery q{tokens, Labels(tokens.size(), Label::O), Source::Noisy};
  greedy_pass(tokens, catalog.brands, EntityType::Brd, q.labels);
  greedy_pass(tokens, catalog.product_types, EntityType::Prd, q.labels);
  return q;
}

Dataset generate_synthetic(const Catalog& catalog) {
  if (catalog.brands.empty() && catalog.product_types.empty())
    throw ValidationError("cannot generate synthetic data from an empty catalog");
  Dataset out;
  out.role = Source::Synthetic;
  auto add = [&out](const std::string& entry, EntityType type) {
    Tokens tokens = normalize_query(entry);
    Labels labels(tokens.size(), inside_of(type));
    labels[0] = begin_of(type);
    out.items.push_back({std::move(tokens), std::move(labels), Source::Synthetic});
  };
  for (const auto& b : catalog.brands) add(b, EntityType::Brd);
  for (const auto& p : catalog.product_types) add(p, EntityType::Prd);
  return out;
}

std::vector<std::size_t> largest_remainder_quotas(const std::vector<std::size_t>& group_sizes,
                                                  std::size_t n) {
  const std::size_t total = std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  std::vector<std::size_t> quotas(group_sizes.size(), 0);
  if (total == 0) return quotas;
  n = std::min(n, total);
  std::vector<std::size_t> remainders(group_sizes.size());
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < group_sizes.size(); ++g) {
    // Exact rational arithmetic: n * size = quota * total + remainder.
    quotas[g] = n * group_sizes[g] / total;
    remainders[g] = n * group_sizes[g] % total;
    assigned += quotas[g];
  }
  std::vector<std::size_t> order(group_sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return group_sizes[a] > group_sizes[b];
  });
  for (std::size_t k = 0; assigned < n; ++k) {
    const std::size_t g = order[k % order.size()];
    if (quotas[g] < group_sizes[g]) {
      ++quotas[g];
      ++assigned;
    }
  }
  return quotas;
}

std::vector<std::size_t> stratified_sample_indices(const Dataset& data, std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> picked;
  if (n >= data.size()) {
    picked.resize(data.size());
    std::iota(picked.begin(), picked.end(), 0);
    return picked;
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i)
    groups[pattern_of(data.items[i].labels).to_string()].push_back(i);

  std::vector<std::size_t> sizes;
  for (const auto& [_, members] : groups) sizes.push_back(members.size());
  const auto quotas = largest_remainder_quotas(sizes, n);

  Rng rng(seed);
  std::size_t g = 0;
  for (auto& [_, members] : groups) {
    // Partial Fisher-Yates: the first quota slots become a uniform sample.
    for (std::size_t k = 0; k < quotas[g]; ++k) {
      std::size_t j = k + rng.index(members.size() - k);
      std::swap(members[k], members[j]);
      picked.push_back(members[k]);
    }
    ++g;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

Dataset stratified_sample(const Dataset& data, std::size_t n, std::uint64_t seed) {
  Dataset out;
  out.role = data.role;
  for (std::size_t i : stratified_sample_indices(data, n, seed)) out.items.push_back(data.items[i]);
  return out;
}

namespace {

bool has_reading(const TaggedQuery& q, const std::string& entry, EntityType type) {
  for (const auto& span : bio_decode(q.labels))
    if (span.type == type && surface(q.tokens, span) == entry) return true;
  return false;
}

}  // namespace

std::pair<std::size_t, std::size_t> reading_counts(const Dataset& data, const std::string& entry) {
  std::size_t brd = 0, prd = 0;
  for (const auto& q : data.items) {
    brd += has_reading(q, entry, EntityType::Brd);
    prd += has_reading(q, entry, EntityType::Prd);
  }
  return {brd, prd};
}

Dataset balance_ambiguous(const Dataset& train, const AmbiguousLexicon& lexicon,
                          std::uint64_t seed) {
  Dataset out = train;
  std::uint64_t stream = 0;
  for (const auto& entry : lexicon.entries) {
    Rng rng = Rng::derive(seed, stream++);
    const auto [brd, prd] = reading_counts(out, entry);
    if (brd == 0 || prd == 0 || brd == prd) continue;
    const EntityType minority = brd < prd ? EntityType::Brd : EntityType::Prd;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < out.items.size(); ++i)
      if (has_reading(out.items[i], entry, minority)) pool.push_back(i);
    const std::size_t deficit = brd > prd ? brd - prd : prd - brd;
    for (std::size_t k = 0; k < deficit; ++k) {
      TaggedQuery copy = out.items[pool[rng.index(pool.size())]];
      out.items.push_back(std::move(copy));
    }
  }
  return out;
}

Labels corrupt_labels(const Labels& labels, Corruption kind, Rng& rng) {
  auto spans = bio_decode(labels);
  if (spans.empty()) return labels;
  const std::size_t pick = rng.index(spans.size());
  auto& s = spans[pick];
  const std::size_t n = labels.size();

  if (kind == Corruption::BoundaryShift) {
    // Options: 0 extend left, 1 extend right, 2 shrink from the right.
    std::vector<int> options;
    if (s.start > 0 && labels[s.start - 1] == Label::O) options.push_back(0);
    if (s.end < n && labels[s.end] == Label::O) options.push_back(1);
    if (s.end - s.start > 1) options.push_back(2);
    if (options.empty()) {
      kind = Corruption::Drop;
    } else {
      switch (options[rng.index(options.size())]) {
        case 0: --s.start; break;
        case 1: ++s.end; break;
        default: --s.end; break;
      }
    }
  }
  if (kind == Corruption::TypeFlip) s.type = s.type == EntityType::Brd ? EntityType::Prd : EntityType::Brd;
  if (kind == Corruption::Drop) spans.erase(spans.begin() + static_cast<std::ptrdiff_t>(pick));
  return bio_encode(spans, n);
}

Dataset label_noisy(const std::vector<Tokens>& queries, const Catalog& catalog, double noise_rate,
                    std::uint64_t seed) {
  if (noise_rate < 0.0 || noise_rate > 1.0) throw ValidationError("noise_rate must be in [0,1]");
  Dataset out;
  out.role = Source::Noisy;
  out.items.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    TaggedQuery q = distant_label(queries[i], catalog);
    Rng rng = Rng::derive(seed, i);
    if (rng.bernoulli(noise_rate)) {
      auto kind = static_cast<Corruption>(rng.index(3));
      q.labels = corrupt_labels(q.labels, kind, rng);
    }
    out.items.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mini-world

namespace {

const std::vector<std::string> kBrandPool = {
    "lg", "milwaukee", "behr", "ge", "cosco", "samsung", "dewalt", "makita", "ridgid", "kobalt",
    "husky", "ryobi", "bosch", "whirlpool", "glacier bay", "american standard", "rust oleum",
    "black decker", "hampton bay", "delta", "moen", "kohler", "frigidaire", "maytag", "honeywell",
    "everbilt", "husqvarna", "toro", "echo", "greenworks", "stanley", "klein tools", "weber",
    "char broil", "rheem", "pergo", "lifeproof", "home decorators", "gorilla", "dap",
    "owens corning", "valspar", "vigoro", "scotts", "miracle gro", "hdx", "ecosmart", "philips",
    "leviton", "lutron", "defiant", "schlage", "kwikset", "feit", "bissell", "dyson", "quikrete",
    "lasko", "vornado", "graco"};

// "washer" and "light" always enter the catalog: the first anchors the
// serving example, the second collides with the "light weight" filler.
const std::vector<std::string> kProductPool = {
    "washer", "light", "dryer", "drill", "paint", "faucet", "table", "fridge", "ice maker",
    "vanity", "toilet", "ceiling fan", "lawn mower", "water heater", "door", "window", "sink",
    "grill", "saw", "hammer", "shelf", "mirror", "rug", "tile", "carpet", "blinds", "generator",
    "pressure washer", "chainsaw", "leaf blower", "trimmer", "microwave", "dishwasher", "range",
    "freezer", "cabinet", "countertop", "shower head", "bathtub", "lock", "doorbell",
    "thermostat", "outlet", "fence", "shed", "mailbox", "hose", "sprinkler", "mulch", "planter",
    "wheelbarrow", "toolbox", "workbench", "air compressor", "nail gun", "sander", "jigsaw",
    "wrench", "screwdriver", "flashlight", "extension cord", "dehumidifier", "space heater"};

const std::vector<std::string> kAmbiguousPool = {"anchor",  "cutter", "instant pot", "weed eater",
                                                 "shark",   "jet",    "titan",       "ranger",
                                                 "blaster", "pioneer"};

const std::vector<std::string> kFillers = {
    "cheap", "discount", "mini", "gas", "electric", "bronze", "white", "black",
    "stainless steel", "cordless", "outdoor", "indoor", "24 in", "36 in", "7.4 cu ft",
    "pull down", "heavy duty", "light weight", "led", "small", "large", "2 pack",
    "with light", "on sale", "clearance", "20v", "brushed nickel", "front load", "portable",
    "light duty"};

const std::vector<std::string> kSyllables = {"ka", "lo", "mi", "ter", "van", "zu", "ro",
                                             "pex", "dal", "qui", "sor", "nex", "bri", "tal",
                                             "gon", "fy"};

std::string pseudo_word(Rng& rng, const std::string& suffix) {
  std::string w;
  const std::size_t parts = 2 + rng.index(2);
  for (std::size_t i = 0; i < parts; ++i) w += kSyllables[rng.index(kSyllables.size())];
  return w + suffix;
}

// Picks `count` entries: the `forced` prefix first, then a shuffled pool,
// then invented words, skipping anything in `exclude`.
std::vector<std::string> pick_entries(std::size_t count, const std::vector<std::string>& pool,
                                      std::size_t forced, const std::set<std::string>& exclude,
                                      Rng& rng, const std::string& suffix) {
  std::vector<std::string> out;
  std::set<std::string> seen = exclude;
  for (std::size_t i = 0; i < forced && i < pool.size() && out.size() < count; ++i)
    if (seen.insert(pool[i]).second) out.push_back(pool[i]);
  std::vector<std::string> rest(pool.begin() + static_cast<std::ptrdiff_t>(std::min(forced, pool.size())),
                                pool.end());
  rng.shuffle(rest);
  for (const auto& e : rest) {
    if (out.size() >= count) break;
    if (seen.insert(e).second) out.push_back(e);
  }
  while (out.size() < count) {
    auto w = pseudo_word(rng, suffix);
    if (seen.insert(w).second) out.push_back(w);
  }
  return out;
}

struct Slot {
  std::string text;
  Label begin;  // O for non-entity text
};

TaggedQuery render(const std::vector<Slot>& slots, Source source) {
  TaggedQuery q;
  q.source = source;
  for (const auto& slot : slots) {
    Tokens toks = normalize_query(slot.text);
    for (std::size_t k = 0; k < toks.size(); ++k) {
      q.tokens.push_back(toks[k]);
      if (slot.begin == Label::O)
        q.labels.push_back(Label::O);
      else
        q.labels.push_back(k == 0 ? slot.begin : inside_of(type_of(slot.begin)));
    }
  }
  return q;
}

class TemplateSampler {
 public:
  TemplateSampler(const Catalog& catalog, std::vector<double> weights)
      : brands_(catalog.brands.begin(), catalog.brands.end()),
        products_(catalog.product_types.begin(), catalog.product_types.end()),
        weights_(std::move(weights)) {}

  // Query with exact labels.
  TaggedQuery sample(Rng& rng, Source source) const {
    auto brand = [&] { return Slot{brands_[rng.index(brands_.size())], Label::BBrd}; };
    auto product = [&] { return Slot{products_[rng.index(products_.size())], Label::BPrd}; };
    auto filler = [&] { return Slot{kFillers[rng.index(kFillers.size())], Label::O}; };
    auto other_product = [&](const Slot& p) {
      std::string t = p.text;
      if (products_.size() < 2) return Slot{t, Label::O};
      while (t == p.text) t = products_[rng.index(products_.size())];
      return Slot{t, Label::O};
    };

    switch (static_cast<Template>(rng.weighted(weights_))) {
      case Template::BrdOPrd: return render({brand(), filler(), product()}, source);
      case Template::BrdOPrdO: return render({brand(), filler(), product(), filler()}, source);
      case Template::BrdPrdO: return render({brand(), product(), filler()}, source);
      case Template::OPrdO: return render({filler(), product(), filler()}, source);
      case Template::BrdPrd: return render({brand(), product()}, source);
      case Template::PrdNegPrd: {
        auto p = product();
        Slot neg{rng.bernoulli(0.5) ? "no" : "without", Label::O};
        if (rng.bernoulli(0.5)) return render({brand(), p, neg, other_product(p)}, source);
        return render({p, neg, other_product(p)}, source);
      }
      case Template::BrdPrdForPrd: {
        auto p = product();
        return render({brand(), p, Slot{"for", Label::O}, other_product(p)}, source);
      }
      case Template::Prd: return render({product()}, source);
    }
    return render({product()}, source);
  }

 private:
  std::vector<std::string> brands_;
  std::vector<std::string> products_;
  std::vector<double> weights_;
};

}  // namespace

MiniWorld generate_miniworld(const MiniWorldConfig& config) {
  if (config.n_brands < 1 || config.n_product_types < 1 || config.n_golden < 1 ||
      config.n_noisy < 1 || config.n_synthetic < 1)
    throw ValidationError("mini-world counts must be >= 1");
  if (config.noise_rate < 0.0 || config.noise_rate > 1.0 || config.ambiguity_rate < 0.0 ||
      config.ambiguity_rate > 1.0)
    throw ValidationError("mini-world rates must be in [0,1]");
  if (config.pattern_weights.size() != kNumTemplates)
    throw ValidationError("pattern_weights needs " + std::to_string(kNumTemplates) + " entries");
  double wsum = 0.0;
  for (double w : config.pattern_weights) {
    if (w < 0.0) throw ValidationError("pattern_weights must be non-negative");
    wsum += w;
  }
  if (wsum <= 0.0) throw ValidationError("pattern_weights must not all be zero");

  const std::size_t smaller = std::min(config.n_brands, config.n_product_types);
  std::size_t n_shared = 0;
  if (config.ambiguity_rate > 0.0) {
    n_shared = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.ambiguity_rate * static_cast<double>(smaller))));
    if (n_shared >= smaller)
      throw ValidationError("infeasible ambiguity_rate: " + std::to_string(n_shared) +
                            " shared entries need more than " + std::to_string(smaller) +
                            " brands and product types");
  }

  MiniWorld world;
  Rng catalog_rng = Rng::derive(config.seed, 0);
  auto shared = pick_entries(n_shared, kAmbiguousPool, 0, {}, catalog_rng, "");
  std::set<std::string> shared_set(shared.begin(), shared.end());
  std::set<std::string> brand_exclude = shared_set;
  brand_exclude.insert(kProductPool.begin(), kProductPool.end());
  auto brands = pick_entries(config.n_brands - n_shared, kBrandPool, 1, brand_exclude, catalog_rng, "");
  std::set<std::string> product_exclude = shared_set;
  product_exclude.insert(brands.begin(), brands.end());
  auto products = pick_entries(config.n_product_types - n_shared, kProductPool, 2, product_exclude,
                               catalog_rng, "er");

  world.catalog.brands.insert(brands.begin(), brands.end());
  world.catalog.brands.insert(shared.begin(), shared.end());
  world.catalog.product_types.insert(products.begin(), products.end());
  world.catalog.product_types.insert(shared.begin(), shared.end());

  const TemplateSampler sampler(world.catalog, config.pattern_weights);

  world.golden.role = Source::Golden;
  std::set<Tokens> golden_texts;
  for (std::size_t i = 0; i < config.n_golden; ++i) {
    Rng rng = Rng::derive(config.seed, 1'000'000 + i);
    world.golden.items.push_back(sampler.sample(rng, Source::Golden));
    golden_texts.insert(world.golden.items.back().tokens);
  }

  // Noisy queries are disjoint from golden; a colliding draw is redrawn from
  // the next sub-stream of the same item.
  std::vector<Tokens> noisy_queries;
  noisy_queries.reserve(config.n_noisy);
  for (std::size_t i = 0; i < config.n_noisy; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng = Rng::derive(config.seed ^ (attempt * 0x51ed27ULL), 2'000'000 + i);
      TaggedQuery q = sampler.sample(rng, Source::Noisy);
      if (!golden_texts.contains(q.tokens)) {
        noisy_queries.push_back(std::move(q.tokens));
        break;
      }
      if (attempt >= 64)
        throw ValidationError("infeasible mini-world: cannot draw noisy queries disjoint from golden");
    }
  }
  world.noisy = label_noisy(noisy_queries, world.catalog, config.noise_rate,
                            Rng::derive(config.seed, 3).next());

  world.synthetic = generate_synthetic(world.catalog);
  if (config.n_synthetic < world.synthetic.size()) {
    std::vector<std::size_t> idx(world.synthetic.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::derive(config.seed, 4);
    rng.shuffle(idx);
    idx.resize(config.n_synthetic);
    std::sort(idx.begin(), idx.end());
    Dataset subset;
    subset.role = Source::Synthetic;
    for (auto i : idx) subset.items.push_back(world.synthetic.items[i]);
    world.synthetic = std::move(subset);
  }
  return world;
}

}  // namespace qtag
