#include <gtest/gtest.h>

#include "bucketbot/sentiment_label.hpp"

using namespace bucketbot;

TEST(Labels, TokensRoundTrip) {
  for (auto l : kAllLabels) {
    EXPECT_EQ(label_from_token(to_token(l)), l);
    EXPECT_EQ(label_from_name(to_name(l)), l);
  }
  EXPECT_FALSE(label_from_token("?").has_value());
  const auto skip = annotation_from_token("skip");
  ASSERT_TRUE(skip.has_value());
  EXPECT_FALSE(skip->has_value());
  EXPECT_EQ(annotation_to_token(std::nullopt), "skip");
  EXPECT_FALSE(annotation_from_token("maybe").has_value());
}

TEST(Labels, PolarityMirrorCollapse) {
  EXPECT_EQ(polarity_sign(SentimentLabel::VeryNegative), -1);
  EXPECT_EQ(polarity_sign(SentimentLabel::Neutral), 0);
  EXPECT_EQ(polarity_sign(SentimentLabel::Positive), 1);
  for (auto l : kAllLabels) {
    EXPECT_EQ(mirror(mirror(l)), l);
    EXPECT_EQ(polarity_sign(mirror(l)), -polarity_sign(l));
    EXPECT_EQ(polarity_sign(collapse_to_three(l)), polarity_sign(l));
  }
  EXPECT_EQ(mirror(SentimentLabel::VeryPositive), SentimentLabel::VeryNegative);
  EXPECT_EQ(collapse_to_three(SentimentLabel::VeryNegative), SentimentLabel::Negative);
  EXPECT_EQ(class_distance(SentimentLabel::VeryNegative, SentimentLabel::VeryPositive), 4);
}
