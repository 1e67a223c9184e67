#include <gtest/gtest.h>

#include <sstream>

#include "emoe/label_format.hpp"
#include "emoe/log.hpp"
#include "emoe/mapper.hpp"

using namespace emoe;

namespace {

std::vector<VariableScale> scales(std::initializer_list<std::string> vars, double lo, double hi) {
  std::vector<VariableScale> out;
  for (const auto& v : vars) out.push_back({v, lo, hi});
  return out;
}

struct CapturedWarnings {
  std::vector<std::string> messages;
  WarningHandler previous;
  CapturedWarnings()
      : previous(set_warning_handler([this](const std::string& m) { messages.push_back(m); })) {}
  ~CapturedWarnings() { set_warning_handler(previous); }
};

} // namespace

TEST(LabelFormat, RejectsDuplicateVariables) {
  EXPECT_THROW(LabelFormat("X", {"a", "a"}, ValueRange::interval(0, 1), Problem::regression),
               ValidationError);
}

TEST(LabelFormat, RegressionNeedsInterval) {
  EXPECT_THROW(LabelFormat("X", {"a"}, ValueRange::binary_set(), Problem::regression),
               ValidationError);
  EXPECT_THROW(LabelFormat("X", {"a"}, ValueRange::interval(1, 1), Problem::regression),
               ValidationError);
  EXPECT_THROW(LabelFormat("X", {"a"}, ValueRange::interval(0, 1), Problem::single_label),
               ValidationError);
}

TEST(LabelFormat, HeadActivationFollowsProblem) {
  const auto reg = default_registry();
  EXPECT_EQ(reg.find("VAD").head_activation(), Activation::identity);
  EXPECT_EQ(reg.find("BE7").head_activation(), Activation::softmax);
  const LabelFormat multi("M", {"x", "y"}, ValueRange::binary_set(), Problem::multi_label);
  EXPECT_EQ(multi.head_activation(), Activation::sigmoid);
  EXPECT_EQ(multi.criterion(), Criterion::binary_cross_entropy);
}

TEST(Registry, DefaultFormats) {
  const auto reg = default_registry();
  EXPECT_EQ(reg.size(), 5u);
  EXPECT_EQ(reg.find("VA").arity(), 2u);
  EXPECT_EQ(reg.find("VAD").arity(), 3u);
  EXPECT_EQ(reg.find("BE5").arity(), 5u);
  EXPECT_EQ(reg.find("BE7").arity(), 7u);
  EXPECT_EQ(reg.find("BE8").arity(), 8u);
  EXPECT_EQ(reg.find("BE5").problem(), Problem::regression);
  EXPECT_EQ(reg.find("BE8").problem(), Problem::single_label);
}

TEST(Registry, DefaultClassesHaveTwentyThreeMembersAndNineteenPairs) {
  const auto reg = default_registry();
  std::size_t members = 0;
  for (const auto& c : reg.classes()) members += c.size();
  EXPECT_EQ(reg.classes().size(), 9u);
  EXPECT_EQ(members, 23u);
  const MultiWayMapper mapper(reg, MapperArchitecture{8, {8}}, 1);
  EXPECT_EQ(mapper.sharing_pairs().size(), 19u);
}

TEST(Registry, UnknownFormatIsRegistryError) {
  EXPECT_THROW(default_registry().find("XYZ"), RegistryError);
}

TEST(Registry, DuplicateFormatRejected) {
  auto reg = default_registry();
  EXPECT_THROW(reg.add_format({"VA", {"v"}, ValueRange::interval(0, 1), Problem::regression}),
               RegistryError);
}

TEST(Registry, ClassMembersMustExist) {
  auto reg = default_registry();
  EXPECT_THROW(reg.add_class({{"VA", "Valence"}, {"NOPE", "x"}}), RegistryError);
  EXPECT_THROW(reg.add_class({{"VA", "Nope"}, {"VAD", "Dominance"}}), RegistryError);
}

TEST(Registry, VariableInAtMostOneClass) {
  auto reg = default_registry();
  EXPECT_THROW(reg.add_class({{"VA", "Valence"}, {"VAD", "Dominance"}}), RegistryError);
}

TEST(Registry, TextRoundTrip) {
  const auto reg = default_registry();
  std::stringstream ss;
  write_registry(ss, reg);
  const auto back = parse_registry(ss);
  ASSERT_EQ(back.size(), reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) EXPECT_EQ(back.formats()[i], reg.formats()[i]);
  EXPECT_EQ(back.classes(), reg.classes());
}

TEST(Registry, ParseErrorsCarryLineNumbers) {
  std::istringstream in("format A regression 0 1 x\nformat B bogus y\n");
  try {
    parse_registry(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream empty("# nothing here\n");
  EXPECT_THROW(parse_registry(empty), ParseError);
}

TEST(ValidateLabel, RegressionRange) {
  const LabelFormat vad = default_registry().find("VAD");
  EXPECT_NO_THROW(validate_label(vad, EmotionLabel{"VAD", {-1, 0, 1}}));
  EXPECT_THROW(validate_label(vad, EmotionLabel{"VAD", {-1.5, 0, 1}}), ValidationError);
  EXPECT_THROW(validate_label(vad, EmotionLabel{"VAD", {0, 0}}), ValidationError);
  EXPECT_THROW(validate_label(vad, EmotionLabel{"VA", {0, 0, 0}}), ValidationError);
}

TEST(ValidateLabel, SingleLabelNeedsOneHot) {
  const LabelFormat be7 = default_registry().find("BE7");
  EXPECT_NO_THROW(validate_label(be7, one_hot(be7, 3)));
  EXPECT_THROW(validate_label(be7, EmotionLabel{"BE7", {1, 1, 0, 0, 0, 0, 0}}), ValidationError);
  EXPECT_THROW(validate_label(be7, EmotionLabel{"BE7", {0.5, 0.5, 0, 0, 0, 0, 0}}),
               ValidationError);
  EXPECT_THROW(one_hot(be7, 7), ValidationError);
}

TEST(ValidateLabel, MultiLabelNeedsBinaryEntries) {
  const LabelFormat multi("M", {"x", "y"}, ValueRange::binary_set(), Problem::multi_label);
  EXPECT_NO_THROW(validate_label(multi, std::vector<double>{1, 1}));
  EXPECT_NO_THROW(validate_label(multi, std::vector<double>{0, 0}));
  EXPECT_THROW(validate_label(multi, std::vector<double>{0.3, 1}), ValidationError);
}

TEST(Normalize, VadRatingsOnNinePointScale) {
  const LabelFormat vad = default_registry().find("VAD");
  const auto y = normalize(std::vector<double>{8.0, 8.1, 5.1},
                           scales({"Valence", "Arousal", "Dominance"}, 1, 9), vad);
  ASSERT_EQ(y.values.size(), 3u);
  EXPECT_NEAR(y.values[0], 0.75, 1e-12);
  EXPECT_NEAR(y.values[1], 0.775, 1e-12);
  EXPECT_NEAR(y.values[2], 0.025, 1e-12);
}

TEST(Normalize, BasicEmotionRatingOnFivePointScale) {
  const LabelFormat be5 = default_registry().find("BE5");
  const auto y = normalize(std::vector<double>{3.4, 1, 1, 1, 1},
                           scales({"Joy", "Anger", "Sadness", "Fear", "Disgust"}, 1, 5), be5);
  EXPECT_NEAR(y.values[0], 0.6, 1e-12);
  EXPECT_NEAR(y.values[1], 0.0, 1e-12);
}

TEST(Normalize, MixedSourceScales) {
  const LabelFormat va = default_registry().find("VA");
  const std::vector<VariableScale> s{{"Valence", -3, 3}, {"Arousal", 1, 9}};
  const auto y = normalize(std::vector<double>{2.8, 4.0}, s, va);
  EXPECT_NEAR(y.values[0], 0.933333333333, 1e-9);
  EXPECT_NEAR(y.values[1], -0.25, 1e-12);
}

TEST(Normalize, ClampsWithWarning) {
  CapturedWarnings w;
  const LabelFormat va = default_registry().find("VA");
  const auto y = normalize(std::vector<double>{10.0, 0.0}, scales({"Valence", "Arousal"}, 1, 9),
                           va);
  EXPECT_DOUBLE_EQ(y.values[0], 1.0);
  EXPECT_DOUBLE_EQ(y.values[1], -1.0);
  EXPECT_EQ(w.messages.size(), 2u);
}

TEST(Normalize, MissingScaleIsConfigError) {
  const LabelFormat va = default_registry().find("VA");
  EXPECT_THROW(normalize(std::vector<double>{1, 1}, scales({"Valence"}, 1, 9), va), ConfigError);
}

TEST(Normalize, DenormalizeInverts) {
  const LabelFormat vad = default_registry().find("VAD");
  const auto s = scales({"Valence", "Arousal", "Dominance"}, 1, 9);
  const std::vector<double> raw{8.0, 8.1, 5.1};
  const auto back = denormalize(normalize(raw, s, vad), s, vad);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], raw[i], 1e-12);
  const LabelFormat be7 = default_registry().find("BE7");
  EXPECT_THROW(denormalize(one_hot(be7, 0), s, be7), UnsupportedError);
}

TEST(Normalize, ClassificationPassesThrough) {
  const LabelFormat be7 = default_registry().find("BE7");
  const auto y = normalize(one_hot(be7, 2).values, {}, be7);
  EXPECT_EQ(y, one_hot(be7, 2));
}

TEST(VariableRef, Parse) {
  EXPECT_EQ(parse_variable_ref("BE5:Joy"), (VariableRef{"BE5", "Joy"}));
  EXPECT_THROW(parse_variable_ref("BE5Joy"), ConfigError);
  EXPECT_THROW(parse_variable_ref(":Joy"), ConfigError);
}
