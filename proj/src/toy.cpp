#include "advexp/toy.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <random>

namespace advexp::toy {

namespace {

using P = Polarity;
using T = ModifierType;

std::string pp(const std::string& prep, const std::string& np) { return "(PP (IN " + prep + ") " + np + ")"; }
std::string np2(const std::string& det, const std::string& noun) { return "(NP (DT " + det + ") (NN " + noun + "))"; }
std::string np3(const std::string& det, const std::string& adj, const std::string& noun) {
  return "(NP (DT " + det + ") (JJ " + adj + ") (NN " + noun + "))";
}
std::string rel(const std::string& who, const std::string& subj_tag, const std::string& subj, const std::string& verb) {
  return "(SBAR (WHNP (WDT " + who + ")) (S (NP (" + subj_tag + " " + subj + ")) (VP (VBD " + verb + "))))";
}

std::vector<BankEntry> build_bank() {
  std::vector<BankEntry> b;
  for (const char* w : {"happily", "warmly", "cheerfully", "gladly", "kindly"})
    b.push_back({T::kAdvp, P::kPositive, std::string("(ADVP (RB ") + w + "))"});
  for (const char* w : {"sadly", "rudely", "angrily", "badly", "coldly"})
    b.push_back({T::kAdvp, P::kNegative, std::string("(ADVP (RB ") + w + "))"});
  for (const char* w : {"today", "again", "here", "yesterday", "later"})
    b.push_back({T::kAdvp, P::kNeutral, std::string("(ADVP (RB ") + w + "))"});

  b.push_back({T::kPp, P::kPositive, pp("with", np2("a", "smile"))});
  b.push_back({T::kPp, P::kPositive, pp("with", "(NP (JJ great) (NN care))")});
  b.push_back({T::kPp, P::kPositive, pp("with", "(NP (JJ real) (NN joy))")});
  b.push_back({T::kPp, P::kPositive, pp("in", np3("a", "lovely", "way"))});
  b.push_back({T::kPp, P::kNegative, pp("with", np2("a", "frown"))});
  b.push_back({T::kPp, P::kNegative, pp("without", "(NP (DT any) (NN care))")});
  b.push_back({T::kPp, P::kNegative, pp("with", "(NP (JJ real) (NN anger))")});
  b.push_back({T::kPp, P::kNegative, pp("in", np3("a", "rude", "way"))});
  b.push_back({T::kPp, P::kNeutral, pp("in", np2("the", "morning"))});
  b.push_back({T::kPp, P::kNeutral, pp("at", np2("the", "end"))});
  b.push_back({T::kPp, P::kNeutral, pp("on", np2("the", "weekend"))});
  b.push_back({T::kPp, P::kNeutral, pp("in", np2("the", "city"))});

  b.push_back({T::kAppos, P::kPositive, np3("a", "true", "gem")});
  b.push_back({T::kAppos, P::kPositive, np3("a", "real", "delight")});
  b.push_back({T::kAppos, P::kPositive, np3("a", "local", "favorite")});
  b.push_back({T::kAppos, P::kPositive, np3("a", "pure", "joy")});
  b.push_back({T::kAppos, P::kNegative, np3("a", "total", "mess")});
  b.push_back({T::kAppos, P::kNegative, np3("a", "real", "disaster")});
  b.push_back({T::kAppos, P::kNegative, np3("a", "sad", "joke")});
  b.push_back({T::kAppos, P::kNegative, np3("a", "huge", "letdown")});
  b.push_back({T::kAppos, P::kNeutral, np3("an", "old", "friend")});
  b.push_back({T::kAppos, P::kNeutral, np3("a", "regular", "stop")});
  b.push_back({T::kAppos, P::kNeutral, np3("a", "family", "business")});
  b.push_back({T::kAppos, P::kNeutral, np3("a", "new", "place")});

  b.push_back({T::kCl, P::kPositive, rel("which", "NN", "everyone", "loved")});
  b.push_back({T::kCl, P::kPositive, rel("which", "PRP", "we", "enjoyed")});
  b.push_back({T::kCl, P::kPositive, rel("which", "NN", "everyone", "praised")});
  b.push_back({T::kCl, P::kNegative, rel("which", "NN", "everyone", "hated")});
  b.push_back({T::kCl, P::kNegative, rel("which", "PRP", "we", "disliked")});
  b.push_back({T::kCl, P::kNegative, rel("which", "NN", "everyone", "mocked")});
  b.push_back({T::kCl, P::kNeutral, rel("which", "PRP", "we", "visited")});
  b.push_back({T::kCl, P::kNeutral, rel("which", "NN", "everyone", "knew")});
  b.push_back({T::kCl, P::kNeutral, rel("which", "PRP", "we", "saw")});
  return b;
}

const std::vector<std::string> kPosAdj = {"great", "excellent", "wonderful", "superb", "lovely", "fantastic"};
const std::vector<std::string> kNegAdj = {"awful", "terrible", "horrible", "poor", "dreadful", "bad"};
const std::vector<std::string> kPosVerb = {"loved", "enjoyed", "liked", "praised"};
const std::vector<std::string> kNegVerb = {"hated", "disliked", "loathed", "mocked"};
const std::vector<std::string> kThings = {"waiter", "staff", "food", "movie", "hotel", "service", "room",  "show",
                                          "meal",   "music", "pizza", "guide", "driver", "plot",   "band", "cafe"};
const std::vector<std::string> kPlaces = {"hotel", "station", "market", "park", "bar", "museum", "beach", "mall"};
const std::vector<std::string> kCrowds = {"critics", "guests", "visitors", "kids", "locals", "tourists"};

const std::vector<std::string> kPeople = {"man", "woman", "boy", "girl", "teacher", "doctor", "farmer", "artist"};
const std::vector<std::vector<std::string>> kVerbGroups = {{"bought", "purchased"}, {"fixed", "repaired"},
                                                           {"saw", "watched"},       {"started", "began"},
                                                           {"made", "built"},        {"sold", "traded"}};
const std::vector<std::string> kObjects = {"car", "book", "house", "game", "boat", "film", "bike", "window", "table", "song"};

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  template <typename V>
  const auto& pick(const V& v) { return v[below(v.size())]; }

  const BankEntry& modifier(T type, P polarity) {
    std::vector<const BankEntry*> c;
    for (const auto& e : modifier_bank())
      if (e.type == type && e.polarity == polarity) c.push_back(&e);
    return *c[below(c.size())];
  }

  P polarity_for(P label, double agreement, double opposite) {
    const double u = unit();
    if (u < agreement) return label;
    if (u < agreement + opposite) return label == P::kPositive ? P::kNegative : P::kPositive;
    return P::kNeutral;
  }

  P uniform_polarity() { return static_cast<P>(below(3)); }

 private:
  std::mt19937_64 rng_;
};

// `final` drops the closing comma of an appositive that ends the sentence.
std::string attach_np(const std::string& np, const BankEntry& m, bool final = false) {
  if (m.type == T::kAppos) return "(NP " + np + " (, ,) " + m.tree + (final ? ")" : " (, ,))");
  return "(NP " + np + " " + m.tree + ")";
}

std::string capitalize_first(std::string tree) {
  // The first leaf always follows the first "(DT ".
  const auto at = tree.find("(DT ");
  if (at != std::string::npos && at + 4 < tree.size()) tree[at + 4] = static_cast<char>(std::toupper(tree[at + 4]));
  return tree;
}

LabeledText make_text(const std::string& id, const std::string& label, TaskKind kind,
                      const std::vector<std::string>& trees) {
  LabeledText t;
  t.id = id;
  t.label = label;
  t.kind = kind;
  for (const auto& s : trees) t.sentences.emplace_back(parse_ptb(capitalize_first(s)));
  t.validate();
  return t;
}

std::string sentence(const std::string& np, const std::string& vp) { return "(S " + np + " " + vp + " (. .))"; }

// Subject and VP of a sentiment sentence before optional modifiers.
struct SentimentParts {
  std::string subject;
  bool subject_has_pp = false;
  std::string vp_head;  // VP children without the closing paren
};

SentimentParts sentiment_core(Gen& g, P label) {
  SentimentParts p;
  if (g.below(2) == 0) {
    p.subject = np2("the", g.pick(kThings));
    if (g.below(2) == 0) {
      p.subject = "(NP " + p.subject + " " + pp("at", np2("the", g.pick(kPlaces))) + ")";
      p.subject_has_pp = true;
    }
    const auto& adj = label == P::kPositive ? g.pick(kPosAdj) : g.pick(kNegAdj);
    p.vp_head = "(VP (VBD was) (ADJP (JJ " + adj + "))";
  } else {
    p.subject = "(NP (DT the) (NNS " + g.pick(kCrowds) + "))";
    const auto& verb = label == P::kPositive ? g.pick(kPosVerb) : g.pick(kNegVerb);
    p.vp_head = "(VP (VBD " + verb + ") " + np2("the", g.pick(kThings));
  }
  return p;
}

// Adds up to `count` modifiers with polarities drawn by `polarity`.
template <typename F>
std::string decorate(Gen& g, SentimentParts p, int count, F&& polarity) {
  bool np_done = false, vp_done = false;
  std::string vp_tail;
  for (int k = 0; k < count; ++k) {
    if (!np_done && (vp_done || g.below(2) == 0)) {
      std::vector<T> types{T::kAppos, T::kCl};
      if (!p.subject_has_pp) types.push_back(T::kPp);
      p.subject = attach_np(p.subject, g.modifier(g.pick(types), polarity()));
      np_done = true;
    } else if (!vp_done) {
      const T type = g.below(2) == 0 ? T::kAdvp : T::kPp;
      vp_tail = " " + g.modifier(type, polarity()).tree;
      vp_done = true;
    }
  }
  return sentence(p.subject, p.vp_head + vp_tail + ")");
}

std::string person(Gen& g, bool with_place, std::string* noun = nullptr) {
  const auto& n = g.pick(kPeople);
  if (noun) *noun = n;
  std::string np = np2("the", n);
  if (with_place) np = "(NP " + np + " " + pp("at", np2("the", g.pick(kPlaces))) + ")";
  return np;
}

}  // namespace

const std::vector<BankEntry>& modifier_bank() {
  static const std::vector<BankEntry> bank = build_bank();
  return bank;
}

namespace {
std::vector<std::string> words_of(P polarity) {
  std::vector<std::string> out;
  for (const auto& e : modifier_bank()) {
    if (e.polarity != polarity) continue;
    for (const auto& w : parse_ptb(e.tree).leaves()) out.push_back(lowercase(w));
  }
  const auto& core_adj = polarity == P::kPositive ? kPosAdj : kNegAdj;
  const auto& core_verb = polarity == P::kPositive ? kPosVerb : kNegVerb;
  out.insert(out.end(), core_adj.begin(), core_adj.end());
  out.insert(out.end(), core_verb.begin(), core_verb.end());
  // Keep only words absent from the other polarity and from neutral entries.
  std::vector<std::string> other;
  for (const auto& e : modifier_bank())
    if (e.polarity != polarity)
      for (const auto& w : parse_ptb(e.tree).leaves()) other.push_back(lowercase(w));
  std::vector<std::string> clean;
  for (const auto& w : out)
    if (std::find(other.begin(), other.end(), w) == other.end() && std::find(clean.begin(), clean.end(), w) == clean.end())
      clean.push_back(w);
  return clean;
}
}  // namespace

const std::vector<std::string>& positive_words() {
  static const auto w = words_of(P::kPositive);
  return w;
}
const std::vector<std::string>& negative_words() {
  static const auto w = words_of(P::kNegative);
  return w;
}

Datasets generate(const Options& o) {
  Gen g(o.seed);
  Datasets d;
  char id[64];

  auto sentiment = [&](int n, const char* split, std::vector<LabeledText>& out) {
    for (int i = 0; i < n; ++i) {
      const P label = i % 2 == 0 ? P::kPositive : P::kNegative;
      auto parts = sentiment_core(g, label);
      const int count = static_cast<int>(g.below(3));
      const auto tree = decorate(g, parts, count, [&] { return g.polarity_for(label, o.agreement, o.opposite); });
      std::snprintf(id, sizeof id, "sent-%s-%04d", split, i);
      out.push_back(make_text(id, label == P::kPositive ? "positive" : "negative", TaskKind::kSingle, {tree}));
    }
  };
  sentiment(o.sentiment_train, "train", d.sentiment_train);
  sentiment(o.sentiment_test, "test", d.sentiment_test);

  auto pairs = [&](int n, const char* split, std::vector<LabeledText>& out) {
    for (int i = 0; i < n; ++i) {
      const bool matched = i % 2 == 0;
      const bool place = g.below(3) == 0;
      std::string subj_noun;
      const std::string subj = person(g, place, &subj_noun);
      const auto& group = g.pick(kVerbGroups);
      const auto& obj = g.pick(kObjects);
      const std::string det = g.below(2) == 0 ? "a" : "the";
      const std::string s1 = sentence(subj, "(VP (VBD " + group[0] + ") " + np2(det, obj) + ")");
      std::string subj2 = subj, verb2 = g.pick(group), obj2 = obj;
      if (!matched) {
        switch (g.below(3)) {
          case 0:
            while (obj2 == obj) obj2 = g.pick(kObjects);
            break;
          case 1:
            while (verb2 == group[0] || verb2 == group[1]) verb2 = g.pick(g.pick(kVerbGroups));
            break;
          default: {
            std::string other = subj_noun;
            while (other == subj_noun) other = g.pick(kPeople);
            subj2 = np2("the", other);
            break;
          }
        }
      }
      const std::string s2 = sentence(subj2, "(VP (VBD " + verb2 + ") " + np2(det, obj2) + ")");
      std::snprintf(id, sizeof id, "pair-%s-%04d", split, i);
      out.push_back(make_text(id, matched ? "paraphrase" : "different",
                              matched ? TaskKind::kPairMatched : TaskKind::kPairUnmatched, {s1, s2}));
    }
  };
  pairs(o.pair_train, "train", d.pair_train);
  pairs(o.pair_test, "test", d.pair_test);

  for (int i = 0; i < o.corpus; ++i) {
    std::string tree;
    if (g.below(5) < 3) {
      auto parts = sentiment_core(g, g.below(2) == 0 ? P::kPositive : P::kNegative);
      tree = decorate(g, parts, 1 + static_cast<int>(g.below(2)), [&] { return g.uniform_polarity(); });
    } else {
      std::string subj = person(g, g.below(3) == 0);
      std::string obj = np2(g.below(2) == 0 ? "a" : "the", g.pick(kObjects));
      std::string tail;
      switch (g.below(3)) {
        case 0: {
          std::vector<T> types{T::kAppos, T::kCl, T::kPp};
          subj = attach_np(subj, g.modifier(g.pick(types), g.uniform_polarity()));
          break;
        }
        case 1: {
          std::vector<T> types{T::kAppos, T::kCl, T::kPp};
          obj = attach_np(obj, g.modifier(g.pick(types), g.uniform_polarity()), true);
          break;
        }
        default:
          tail = " " + g.modifier(g.below(2) == 0 ? T::kAdvp : T::kPp, g.uniform_polarity()).tree;
      }
      tree = sentence(subj, "(VP (VBD " + g.pick(g.pick(kVerbGroups)) + ") " + obj + tail + ")");
    }
    std::snprintf(id, sizeof id, "corpus-%05d", i);
    d.corpus.push_back(make_text(id, "none", TaskKind::kSingle, {tree}));
  }
  return d;
}

}  // namespace advexp::toy
