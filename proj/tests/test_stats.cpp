#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "talc/stats.hpp"

namespace talc {
namespace {

TEST(Stats, PearsonKnownValues) {
    const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8}, z = {4, 3, 2, 1};
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
    EXPECT_NEAR(pearson(x, z), -1.0, 1e-15);
    EXPECT_TRUE(std::isnan(pearson(std::vector<double>{1, 1}, std::vector<double>{2, 3})));
}

TEST(Stats, AverageRanksHandleTies) {
    EXPECT_EQ(average_ranks(std::vector<double>{10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Stats, SpearmanIsRankBased) {
    const std::vector<double> x = {1, 2, 3, 4, 5}, y = {1, 8, 27, 64, 125};
    EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
    EXPECT_LT(pearson(x, y), 1.0);
}

}  // namespace
}  // namespace talc
